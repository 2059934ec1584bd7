#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "csikf/csi_io.hpp"
#include "csikf/errors.hpp"
#include "csikf/simulator.hpp"

using namespace csikf;

namespace {

const PilotSet& small_pilots() {
    static const PilotSet p(16, {-3, -2, 2, 3}, 2);
    return p;
}

IngestResult ingest_text(const std::string& text, const PilotSet& p = small_pilots()) {
    std::istringstream in(text);
    return ingest_csi(in, kCsvFormat, p, 0.01);
}

std::size_t parse_error_line(const std::string& text) {
    try {
        ingest_text(text);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

}  // namespace

TEST_CASE("format_double round-trips") {
    for (double x : {0.0, -0.0, 1.0 / 3.0, 1e-300, -2.5e17, std::numeric_limits<double>::denorm_min(),
                     std::nextafter(1.0, 2.0)}) {
        const std::string s = format_double(x);
        CHECK(std::strtod(s.c_str(), nullptr) == x);
    }
}

TEST_CASE("write_csi then ingest_csi is bit-identical") {
    SimConfig c;
    c.n_packets = 5;
    c.seed = 4;
    const SimTrace t = simulate(c);
    std::stringstream buf;
    write_csi(buf, t.observations, c.n_tx, c.n_rx, c.pilots);
    const IngestResult r = ingest_csi(buf, kCsvFormat, c.pilots, c.noise_var());
    CHECK(r.warnings.empty());
    CHECK(r.n_tx == 3);
    CHECK(r.n_rx == 3);
    REQUIRE(r.observations.size() == t.observations.size());
    for (std::size_t k = 0; k < t.size(); ++k) {
        CHECK(r.observations[k].csi == t.observations[k].csi);
        CHECK(r.observations[k].packet_index == t.observations[k].packet_index);
    }
}

TEST_CASE("ingest_csi from a file path") {
    SimConfig c;
    c.n_packets = 2;
    const SimTrace t = simulate(c);
    const auto path = std::filesystem::temp_directory_path() / "csikf_io_test.csv";
    write_csi(path.string(), t.observations, 3, 3, c.pilots);
    const IngestResult r = ingest_csi(path.string(), kCsvFormat, c.pilots, 0.01);
    CHECK(r.observations.size() == 2);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(ingest_csi(path.string(), kCsvFormat, c.pilots, 0.01), InputError);
}

TEST_CASE("empty input gives no packets and a warning") {
    const IngestResult r = ingest_text("");
    CHECK(r.observations.empty());
    REQUIRE(r.warnings.size() == 1);
    CHECK(r.warnings[0].find("empty") != std::string::npos);
}

TEST_CASE("hand-written three-packet fixture") {
    const std::string text =
        "packet,tx,rx,pilot_index,re,im\n"
        "1,0,0,-3,1,0\n1,0,0,-2,0,1\n1,0,0,2,-1,0\n1,0,0,3,0,-1\n"
        "1,0,1,-3,0.5,0.5\n1,0,1,-2,0.25,-0.75\n1,0,1,2,2,3\n1,0,1,3,-4,1e-3\n"
        "2,0,1,3,7,7\n2,0,1,2,6,6\n2,0,1,-2,5,5\n2,0,1,-3,4,4\n"
        "2,0,0,3,3,3\n2,0,0,2,2,2\n2,0,0,-2,1,1\n2,0,0,-3,0,0\n"
        "5, 0, 0, -3, 1.5, -1.5\r\n5,0,0,-2,0,0\n5,0,0,2,0,0\n5,0,0,3,0,0\n"
        "5,0,1,-3,0,0\n5,0,1,-2,0,0\n5,0,1,2,0,0\n5,0,1,3,-0.125,8\n";
    const IngestResult r = ingest_text(text);
    CHECK(r.warnings.empty());
    CHECK(r.n_tx == 1);
    CHECK(r.n_rx == 2);
    REQUIRE(r.observations.size() == 3);
    CMatrix e1(4, 2), e2(4, 2), e5 = CMatrix::Zero(4, 2);
    e1 << cplx(1, 0), cplx(0.5, 0.5), cplx(0, 1), cplx(0.25, -0.75), cplx(-1, 0), cplx(2, 3), cplx(0, -1),
        cplx(-4, 1e-3);
    e2 << cplx(0, 0), cplx(4, 4), cplx(1, 1), cplx(5, 5), cplx(2, 2), cplx(6, 6), cplx(3, 3), cplx(7, 7);
    e5(0, 0) = {1.5, -1.5};
    e5(3, 1) = {-0.125, 8};
    CHECK(r.observations[0].csi == e1);
    CHECK(r.observations[1].csi == e2);
    CHECK(r.observations[2].csi == e5);
    CHECK(r.observations[2].packet_index == 5);
    CHECK(r.observations[0].noise_var == 0.01);
}

TEST_CASE("missing subcarriers reject the packet with a reason") {
    const std::string text =
        "packet,tx,rx,pilot_index,re,im\n"
        "1,0,0,-3,1,0\n1,0,0,-2,1,0\n1,0,0,2,1,0\n"
        "2,0,0,-3,1,0\n2,0,0,-2,1,0\n2,0,0,2,1,0\n2,0,0,3,1,0\n2,0,0,7,1,0\n";
    const IngestResult r = ingest_text(text);
    REQUIRE(r.observations.size() == 1);
    CHECK(r.observations[0].packet_index == 2);
    REQUIRE(r.warnings.size() == 2);
    CHECK(r.warnings[0].find("packet 1 rejected") != std::string::npos);
    CHECK(r.warnings[1].find("non-pilot") != std::string::npos);
}

TEST_CASE("parse errors carry the line number") {
    const std::string h = "packet,tx,rx,pilot_index,re,im\n";
    CHECK(parse_error_line("packet,tx,rx\n") == 1);
    CHECK(parse_error_line(h + "1,0,0,-3,1,0\n1,0,0,-2,x,0\n") == 3);
    CHECK(parse_error_line(h + "1,0,0,-3,1\n") == 2);
    CHECK(parse_error_line(h + "2,0,0,-3,1,0\n1,0,0,-3,1,0\n") == 3);
    CHECK(parse_error_line(h + "1,0,0,-3,1,0\n2,0,0,-3,1,0\n1,0,0,-2,1,0\n") == 4);
    CHECK(parse_error_line(h + "1,0,0,-3,1,nan\n") == 2);
    // Antenna count change: reported at the first row of the offending packet.
    std::string two = h;
    for (int q : {-3, -2, 2, 3}) two += "1,0,0," + std::to_string(q) + ",1,0\n";
    for (int q : {-3, -2, 2, 3}) two += "2,0,0," + std::to_string(q) + ",1,0\n";
    for (int q : {-3, -2, 2, 3}) two += "2,0,1," + std::to_string(q) + ",1,0\n";
    CHECK(parse_error_line(two) == 6);
}

TEST_CASE("unknown format id is an input error") {
    std::istringstream in("");
    CHECK_THROWS_AS(ingest_csi(in, "pcap", small_pilots(), 0.01), InputError);
}
