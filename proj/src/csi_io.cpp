#include "csikf/csi_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string_view>

#include "csikf/errors.hpp"

namespace csikf {

std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

template <class T>
T parse_field(std::string_view field, const char* name, std::size_t line) {
    field = trim(field);
    T v{};
    const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
    if (res.ec != std::errc() || res.ptr != field.data() + field.size())
        throw ParseError("bad " + std::string(name) + " field '" + std::string(field) + "'", line);
    return v;
}

struct Row {
    long packet;
    int tx, rx, pilot;
    cplx value;
};

struct PacketBuffer {
    long packet = -1;
    std::size_t first_line = 0;
    std::vector<Row> rows;
};

}  // namespace

IngestResult ingest_csi(std::istream& in, const std::string& format_id, const PilotSet& pilots,
                        double noise_var) {
    if (format_id != kCsvFormat) throw InputError("ingest_csi: unknown format '" + format_id + "'");
    IngestResult result;

    std::map<int, int> pilot_row;
    for (int m = 0; m < pilots.num_pilots(); ++m) pilot_row[pilots.indices()[m]] = m;

    std::string line;
    std::size_t lineno = 0;
    bool header_seen = false;
    PacketBuffer buf;
    std::optional<long> last_packet;

    auto flush = [&]() {
        if (buf.rows.empty()) return;
        int ntx = 0, nrx = 0;
        for (const Row& r : buf.rows) {
            ntx = std::max(ntx, r.tx + 1);
            nrx = std::max(nrx, r.rx + 1);
        }
        if (result.n_tx == 0) {
            result.n_tx = ntx;
            result.n_rx = nrx;
        } else if (ntx != result.n_tx || nrx != result.n_rx) {
            throw ParseError("packet " + std::to_string(buf.packet) + " has " + std::to_string(ntx) + "x" +
                                 std::to_string(nrx) + " antennas, earlier packets " +
                                 std::to_string(result.n_tx) + "x" + std::to_string(result.n_rx),
                             buf.first_line);
        }
        const int n = result.n_tx * result.n_rx;
        CMatrix csi = CMatrix::Zero(pilots.num_pilots(), n);
        std::vector<char> seen(static_cast<std::size_t>(pilots.num_pilots()) * n, 0);
        std::size_t unknown = 0;
        for (const Row& r : buf.rows) {
            const auto it = pilot_row.find(r.pilot);
            if (it == pilot_row.end()) {
                ++unknown;
                continue;
            }
            const int col = r.tx * result.n_rx + r.rx;
            csi(it->second, col) = r.value;
            seen[static_cast<std::size_t>(col) * pilots.num_pilots() + it->second] = 1;
        }
        std::size_t missing = 0;
        for (char s : seen) missing += s == 0;
        if (unknown > 0)
            result.warnings.push_back("packet " + std::to_string(buf.packet) + ": ignored " +
                                      std::to_string(unknown) + " rows on non-pilot subcarriers");
        if (missing > 0) {
            result.warnings.push_back("packet " + std::to_string(buf.packet) + " rejected: " +
                                      std::to_string(missing) + " of " + std::to_string(seen.size()) +
                                      " subcarrier entries missing");
        } else {
            Observation obs;
            obs.csi = std::move(csi);
            obs.noise_var = noise_var;
            obs.packet_index = buf.packet;
            result.observations.push_back(std::move(obs));
        }
        buf.rows.clear();
    };

    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view s = trim(line);
        if (s.empty()) continue;
        if (!header_seen) {
            const auto cols = split(s, ',');
            static constexpr const char* expected[] = {"packet", "tx", "rx", "pilot_index", "re", "im"};
            bool ok = cols.size() == 6;
            for (std::size_t i = 0; ok && i < 6; ++i) ok = trim(cols[i]) == expected[i];
            if (!ok) throw ParseError("expected header 'packet,tx,rx,pilot_index,re,im'", lineno);
            header_seen = true;
            continue;
        }
        const auto f = split(s, ',');
        if (f.size() != 6)
            throw ParseError("expected 6 fields, found " + std::to_string(f.size()), lineno);
        Row r;
        r.packet = parse_field<long>(f[0], "packet", lineno);
        r.tx = parse_field<int>(f[1], "tx", lineno);
        r.rx = parse_field<int>(f[2], "rx", lineno);
        r.pilot = parse_field<int>(f[3], "pilot_index", lineno);
        r.value = {parse_field<double>(f[4], "re", lineno), parse_field<double>(f[5], "im", lineno)};
        if (r.packet < 0 || r.tx < 0 || r.rx < 0) throw ParseError("negative packet or antenna index", lineno);
        if (!std::isfinite(r.value.real()) || !std::isfinite(r.value.imag()))
            throw ParseError("non-finite CSI value", lineno);

        if (buf.rows.empty() || r.packet != buf.packet) {
            if (last_packet && r.packet <= *last_packet)
                throw ParseError("packet " + std::to_string(r.packet) + " follows packet " +
                                     std::to_string(*last_packet),
                                 lineno);
            flush();
            buf.packet = r.packet;
            buf.first_line = lineno;
            last_packet = r.packet;
        }
        buf.rows.push_back(r);
    }
    flush();

    if (!header_seen) result.warnings.push_back("empty input: no header and no packets");
    else if (result.observations.empty() && lineno > 0) result.warnings.push_back("no complete packets");
    return result;
}

IngestResult ingest_csi(const std::string& path, const std::string& format_id, const PilotSet& pilots,
                        double noise_var) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open '" + path + "'");
    return ingest_csi(in, format_id, pilots, noise_var);
}

void write_csi(std::ostream& out, const std::vector<Observation>& observations, int n_tx, int n_rx,
               const PilotSet& pilots) {
    out << "packet,tx,rx,pilot_index,re,im\n";
    for (const Observation& obs : observations) {
        if (obs.csi.rows() != pilots.num_pilots() || obs.csi.cols() != n_tx * n_rx)
            throw InputError("write_csi: observation shape does not match pilots and antennas");
        for (int tx = 0; tx < n_tx; ++tx)
            for (int rx = 0; rx < n_rx; ++rx)
                for (int m = 0; m < pilots.num_pilots(); ++m) {
                    const cplx v = obs.csi(m, tx * n_rx + rx);
                    out << obs.packet_index << ',' << tx << ',' << rx << ',' << pilots.indices()[m] << ','
                        << format_double(v.real()) << ',' << format_double(v.imag()) << '\n';
                }
    }
}

void write_csi(const std::string& path, const std::vector<Observation>& observations, int n_tx, int n_rx,
               const PilotSet& pilots) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    write_csi(out, observations, n_tx, n_rx, pilots);
    if (!out) throw InputError("write failed on '" + path + "'");
}

}  // namespace csikf
