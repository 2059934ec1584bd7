#include "csikf/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <ostream>
#include <set>
#include <thread>

#include "csikf/crlb.hpp"
#include "csikf/csi_io.hpp"
#include "csikf/errors.hpp"
#include "csikf/linreg.hpp"
#include "csikf/rng.hpp"

namespace csikf {

using nlohmann::json;

std::string to_string(Method m) {
    switch (m) {
        case Method::KalmanMap: return "kalman_map";
        case Method::Linreg: return "linreg";
        case Method::OracleKf: return "oracle_kf";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "kalman_map") return Method::KalmanMap;
    if (s == "linreg") return Method::Linreg;
    if (s == "oracle_kf") return Method::OracleKf;
    throw InputError("unknown method '" + s + "' (expected kalman_map, linreg or oracle_kf)");
}

std::string AntennaSetup::label() const { return std::to_string(n_tx) + "x" + std::to_string(n_rx); }

AntennaSetup parse_setup(const std::string& s) {
    const auto x = s.find('x');
    AntennaSetup a;
    try {
        if (x == std::string::npos) throw std::invalid_argument(s);
        std::size_t used = 0;
        a.n_tx = std::stoi(s.substr(0, x), &used);
        if (used != x) throw std::invalid_argument(s);
        a.n_rx = std::stoi(s.substr(x + 1), &used);
        if (used != s.size() - x - 1) throw std::invalid_argument(s);
    } catch (const std::logic_error&) {
        throw InputError("antenna setup '" + s + "' is not of the form TXxRX");
    }
    if (a.n_tx < 1 || a.n_rx < 1) throw InputError("antenna setup '" + s + "' has a zero dimension");
    return a;
}

void ExperimentSpec::validate() const {
    SimConfig s = sim;
    s.validate();
    if (n_trials < 1) throw InputError("n_trials must be at least 1");
    if (snr_sweep_db.empty()) throw InputError("snr_sweep_db is empty");
    if (antenna_setups.empty()) throw InputError("antenna_setups is empty");
    if (methods.empty()) throw InputError("methods is empty");
    for (const auto& a : antenna_setups)
        if (a.n_tx < 1 || a.n_rx < 1 || a.n_tx > sim.n_tx || a.n_rx > sim.n_rx)
            throw InputError("antenna setup " + a.label() + " does not fit the simulated " +
                             std::to_string(sim.n_tx) + "x" + std::to_string(sim.n_rx) + " array");
    if (parallelism < 0) throw InputError("parallelism must be >= 0");
    if (estimator.newton_max_iters < 1) throw InputError("newton_max_iters must be >= 1");
    if (!(estimator.newton_tol > 0.0)) throw InputError("newton_tol must be positive");
    if (estimator.n_intervals < 0) throw InputError("n_intervals must be >= 0");
}

EstimatorConfig ExperimentSpec::estimator_config(double snr_db, const AntennaSetup& setup) const {
    EstimatorConfig cfg = EstimatorConfig::make(sim.pilots, sim.alpha,
                                                stationary_process_noise(sim.alpha, sim.profile(), setup.num_channels()),
                                                noise_var_from_snr_db(snr_db), sim.slope_support, sim.offset_support);
    cfg.newton_max_iters = estimator.newton_max_iters;
    cfg.newton_tol = estimator.newton_tol;
    if (estimator.n_intervals > 0) cfg.n_intervals = estimator.n_intervals;
    cfg.gamma_covariance = estimator.gamma_covariance;
    return cfg;
}

int ExperimentSpec::worker_count() const {
    if (parallelism > 0) return parallelism;
    return std::max(1u, std::thread::hardware_concurrency());
}

json to_json(const ExperimentSpec& spec) {
    json j;
    j["seed"] = spec.sim.seed;
    j["n_trials"] = spec.n_trials;
    j["n_packets"] = spec.sim.n_packets;
    j["snr_sweep_db"] = spec.snr_sweep_db;
    std::vector<std::string> setups, methods;
    for (const auto& a : spec.antenna_setups) setups.push_back(a.label());
    for (Method m : spec.methods) methods.push_back(to_string(m));
    j["antenna_setups"] = setups;
    j["methods"] = methods;
    j["output_dir"] = spec.output_dir;
    j["parallelism"] = spec.parallelism;
    j["n_tx"] = spec.sim.n_tx;
    j["n_rx"] = spec.sim.n_rx;
    j["alpha"] = spec.sim.alpha;
    j["slope_support"] = {spec.sim.slope_support.lo, spec.sim.slope_support.hi};
    j["offset_support"] = {spec.sim.offset_support.lo, spec.sim.offset_support.hi};
    j["dft_size"] = spec.sim.pilots.dft_size();
    j["pilot_indices"] = spec.sim.pilots.indices();
    j["channel_length"] = spec.sim.pilots.channel_length();
    const RVector p = spec.sim.profile();
    j["tap_profile"] = std::vector<double>(p.data(), p.data() + p.size());
    j["reference_first_packet"] = spec.sim.reference_first_packet;
    j["newton_max_iters"] = spec.estimator.newton_max_iters;
    j["newton_tol"] = spec.estimator.newton_tol;
    j["n_intervals"] = spec.estimator.n_intervals;
    j["gamma_covariance"] = spec.estimator.gamma_covariance == GammaCovariance::Full ? "full" : "diagonal";
    return j;
}

namespace {

Interval interval_from(const json& v, const char* key) {
    if (!v.is_array() || v.size() != 2) throw InputError(std::string(key) + " must be [lo, hi]");
    return {v[0].get<double>(), v[1].get<double>()};
}

}  // namespace

ExperimentSpec spec_from_json(const json& j, ExperimentSpec spec) {
    if (!j.is_object()) throw InputError("spec must be a JSON object");
    static const std::set<std::string> known = {
        "seed", "n_trials", "n_packets", "snr_sweep_db", "antenna_setups", "methods", "output_dir",
        "parallelism", "n_tx", "n_rx", "alpha", "slope_support", "offset_support", "dft_size",
        "pilot_indices", "channel_length", "tap_profile", "reference_first_packet", "newton_max_iters",
        "newton_tol", "n_intervals", "gamma_covariance"};
    for (const auto& [k, v] : j.items())
        if (!known.count(k)) throw InputError("unknown spec field '" + k + "'");

    try {
        if (j.contains("seed")) spec.sim.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("n_trials")) spec.n_trials = j["n_trials"].get<int>();
        if (j.contains("n_packets")) spec.sim.n_packets = j["n_packets"].get<int>();
        if (j.contains("snr_sweep_db")) spec.snr_sweep_db = j["snr_sweep_db"].get<std::vector<double>>();
        if (j.contains("antenna_setups")) {
            spec.antenna_setups.clear();
            for (const auto& s : j["antenna_setups"]) spec.antenna_setups.push_back(parse_setup(s.get<std::string>()));
        }
        if (j.contains("methods")) {
            spec.methods.clear();
            for (const auto& s : j["methods"]) spec.methods.push_back(method_from_string(s.get<std::string>()));
        }
        if (j.contains("output_dir")) spec.output_dir = j["output_dir"].get<std::string>();
        if (j.contains("parallelism")) {
            const auto& v = j["parallelism"];
            spec.parallelism = v.is_string() && v.get<std::string>() == "auto" ? 0 : v.get<int>();
        }
        if (j.contains("n_tx")) spec.sim.n_tx = j["n_tx"].get<int>();
        if (j.contains("n_rx")) spec.sim.n_rx = j["n_rx"].get<int>();
        if (j.contains("alpha")) spec.sim.alpha = j["alpha"].get<double>();
        if (j.contains("slope_support")) spec.sim.slope_support = interval_from(j["slope_support"], "slope_support");
        if (j.contains("offset_support"))
            spec.sim.offset_support = interval_from(j["offset_support"], "offset_support");
        if (j.contains("dft_size") || j.contains("pilot_indices") || j.contains("channel_length")) {
            const int m = j.value("dft_size", spec.sim.pilots.dft_size());
            const auto q = j.value("pilot_indices", spec.sim.pilots.indices());
            const int l = j.value("channel_length", spec.sim.pilots.channel_length());
            spec.sim.pilots = PilotSet(m, q, l);
            if (!j.contains("tap_profile")) spec.sim.tap_profile = RVector();
        }
        if (j.contains("tap_profile")) {
            const auto p = j["tap_profile"].get<std::vector<double>>();
            spec.sim.tap_profile = Eigen::Map<const RVector>(p.data(), static_cast<Eigen::Index>(p.size()));
        }
        if (j.contains("reference_first_packet"))
            spec.sim.reference_first_packet = j["reference_first_packet"].get<bool>();
        if (j.contains("newton_max_iters")) spec.estimator.newton_max_iters = j["newton_max_iters"].get<int>();
        if (j.contains("newton_tol")) spec.estimator.newton_tol = j["newton_tol"].get<double>();
        if (j.contains("n_intervals")) spec.estimator.n_intervals = j["n_intervals"].get<int>();
        if (j.contains("gamma_covariance")) {
            const auto g = j["gamma_covariance"].get<std::string>();
            if (g == "full") spec.estimator.gamma_covariance = GammaCovariance::Full;
            else if (g == "diagonal") spec.estimator.gamma_covariance = GammaCovariance::Diagonal;
            else throw InputError("gamma_covariance must be 'full' or 'diagonal'");
        }
    } catch (const json::exception& e) {
        throw InputError(std::string("spec: ") + e.what());
    }
    return spec;
}

namespace {

// Squared errors of one (trial, setup, method) per packet.
struct Series {
    std::vector<double> channel, aligned, slope, offset, at_bound;
};

double aligned_error(const CMatrix& est, const CMatrix& truth) {
    const double e = est.squaredNorm() + truth.squaredNorm() - 2.0 * std::abs(est.cwiseProduct(truth.conjugate()).sum());
    return std::max(0.0, e);
}

Series run_method(Method method, const SimTrace& trace, const EstimatorConfig& cfg, const PilotSet& pilots) {
    const int k_total = static_cast<int>(trace.size());
    Series s;
    s.channel.resize(k_total);
    s.aligned.resize(k_total);
    s.slope.assign(k_total, 0.0);
    s.offset.assign(k_total, 0.0);
    s.at_bound.assign(k_total, 0.0);

    auto record = [&](int k, const CMatrix& est) {
        s.channel[k] = (est - trace.true_channels[k].taps).squaredNorm();
        s.aligned[k] = aligned_error(est, trace.true_channels[k].taps);
    };
    auto record_phase = [&](int k, double slope, double offset) {
        const PhaseDistortion& t = trace.true_distortions[k];
        s.slope[k] = (slope - t.slope) * (slope - t.slope);
        const double d = wrap_phase(offset - t.offset);
        s.offset[k] = d * d;
    };

    switch (method) {
        case Method::KalmanMap: {
            FilterState st = init_filter(cfg, pilots, trace.observations.front().num_channels());
            for (int k = 0; k < k_total; ++k) {
                StepResult r = step(trace.observations[k], st, cfg, pilots);
                st = std::move(r.state);
                record(k, st.estimate);
                const PhaseDistortion& d = r.solution.distortion;
                record_phase(k, d.slope, d.offset);
                s.at_bound[k] = (d.slope <= cfg.slope_support.lo || d.slope >= cfg.slope_support.hi) ? 1.0 : 0.0;
            }
            break;
        }
        case Method::OracleKf: {
            FilterState st = init_filter(cfg, pilots, trace.observations.front().num_channels());
            for (int k = 0; k < k_total; ++k) {
                st = step_known_distortion(trace.observations[k], st, trace.true_distortions[k], cfg, pilots);
                record(k, st.estimate);
            }
            break;
        }
        case Method::Linreg: {
            const Eigen::LDLT<CMatrix> gram(pilots.gram());
            for (int k = 0; k < k_total; ++k) {
                const RegressionResult r = linreg_sanitize(trace.observations[k], pilots);
                record(k, gram.solve(pilots.dft().adjoint() * r.sanitized));
                record_phase(k, r.slope, r.intercept);
            }
            break;
        }
    }
    return s;
}

struct Accumulator {
    std::vector<double> channel, channel2, omega, omega2, slope, offset, aligned, bound;

    explicit Accumulator(int k)
        : channel(k), channel2(k), omega(k), omega2(k), slope(k), offset(k), aligned(k), bound(k) {}

    void add(const Series& s) {
        for (std::size_t k = 0; k < channel.size(); ++k) {
            const double o = s.slope[k] + s.offset[k];
            channel[k] += s.channel[k];
            channel2[k] += s.channel[k] * s.channel[k];
            omega[k] += o;
            omega2[k] += o * o;
            slope[k] += s.slope[k];
            offset[k] += s.offset[k];
            aligned[k] += s.aligned[k];
            bound[k] += s.at_bound[k];
        }
    }
};

double standard_error(double sum, double sum2, int n) {
    if (n < 2) return 0.0;
    const double mean = sum / n;
    const double var = std::max(0.0, (sum2 - n * mean * mean) / (n - 1));
    return std::sqrt(var / n);
}

}  // namespace

const MetricRow& find_row(const MetricTable& t, Method m, double snr_db, const AntennaSetup& setup,
                          int packet_index) {
    for (const MetricRow& r : t)
        if (r.method == m && r.snr_db == snr_db && r.setup == setup && r.packet_index == packet_index) return r;
    throw InputError("no metric row for " + to_string(m) + " at " + std::to_string(snr_db) + " dB, " +
                     setup.label() + ", packet " + std::to_string(packet_index));
}

MetricTable run_experiment(const ExperimentSpec& spec) {
    spec.validate();
    const int n_snr = static_cast<int>(spec.snr_sweep_db.size());
    const int n_setup = static_cast<int>(spec.antenna_setups.size());
    const int n_method = static_cast<int>(spec.methods.size());
    const int n_packets = spec.sim.n_packets;
    const PilotSet& pilots = spec.sim.pilots;

    // results[item][setup * n_method + method], item = snr * n_trials + trial
    const std::size_t n_items = static_cast<std::size_t>(n_snr) * spec.n_trials;
    std::vector<std::vector<Series>> results(n_items);

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    auto worker = [&]() {
        while (true) {
            const std::size_t item = next.fetch_add(1);
            if (item >= n_items) return;
            try {
                const int si = static_cast<int>(item / spec.n_trials);
                const int trial = static_cast<int>(item % spec.n_trials);
                SimConfig sc = spec.sim;
                sc.snr_db = spec.snr_sweep_db[si];
                sc.seed = derive_seed(spec.sim.seed, Stream::Trial, static_cast<std::uint64_t>(trial));
                const SimTrace full = simulate(sc);
                std::vector<Series> out;
                out.reserve(n_setup * n_method);
                for (const AntennaSetup& a : spec.antenna_setups) {
                    const SimTrace sub = select_antennas(full, sc.n_rx, a.n_tx, a.n_rx);
                    const EstimatorConfig cfg = spec.estimator_config(sc.snr_db, a);
                    for (Method m : spec.methods) out.push_back(run_method(m, sub, cfg, pilots));
                }
                results[item] = std::move(out);
            } catch (...) {
                std::lock_guard<std::mutex> lock(err_mu);
                if (!first_error) first_error = std::current_exception();
                next.store(n_items);
            }
        }
    };
    const int n_workers = std::min<int>(spec.worker_count(), static_cast<int>(n_items));
    std::vector<std::thread> pool;
    for (int w = 1; w < n_workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);

    MetricTable table;
    for (int si = 0; si < n_snr; ++si) {
        const double snr = spec.snr_sweep_db[si];
        for (int ai = 0; ai < n_setup; ++ai) {
            const AntennaSetup& a = spec.antenna_setups[ai];
            const EstimatorConfig cfg = spec.estimator_config(snr, a);
            // The filtering bound does not depend on the distortion values.
            const std::vector<PhaseDistortion> zero(n_packets);
            const CrlbTrace ct = crlb_filter_trace(pilots, cfg.alpha, cfg.process_noise_vars, cfg.noise_var, zero,
                                                   n_packets, false);
            const double crlb_omega =
                crlb_phase(phase_crlb_input(pilots, spec.sim.profile(), a.num_channels(), cfg.noise_var));

            for (int mi = 0; mi < n_method; ++mi) {
                Accumulator acc(n_packets);
                for (int trial = 0; trial < spec.n_trials; ++trial)
                    acc.add(results[static_cast<std::size_t>(si) * spec.n_trials + trial][ai * n_method + mi]);
                const int n = spec.n_trials;
                double cum = 0.0;
                for (int k = 0; k < n_packets; ++k) {
                    MetricRow r;
                    r.method = spec.methods[mi];
                    r.snr_db = snr;
                    r.setup = a;
                    r.packet_index = k + 1;
                    r.mse_channel = acc.channel[k] / n;
                    r.mse_omega = acc.omega[k] / n;
                    r.crlb_channel = ct.scalar_bound_per_packet[k];
                    r.crlb_omega = crlb_omega;
                    r.n_trials = n;
                    r.se_channel = standard_error(acc.channel[k], acc.channel2[k], n);
                    r.se_omega = standard_error(acc.omega[k], acc.omega2[k], n);
                    r.mse_slope = acc.slope[k] / n;
                    r.mse_offset = acc.offset[k] / n;
                    cum += r.mse_omega;
                    r.mse_omega_cumulative = cum / (k + 1);
                    r.mse_channel_aligned = acc.aligned[k] / n;
                    r.prior_bound_fraction = acc.bound[k] / n;
                    table.push_back(r);
                }
            }
        }
    }
    return table;
}

namespace {

std::string db(double x) { return x > 0.0 ? format_double(10.0 * std::log10(x)) : "-inf"; }

void write_row(std::ostream& out, const MetricRow& r) {
    out << to_string(r.method) << ',' << format_double(r.snr_db) << ',' << r.setup.label() << ',' << r.packet_index
        << ',' << format_double(r.mse_channel) << ',' << format_double(r.mse_omega) << ','
        << format_double(r.crlb_channel) << ',' << format_double(r.crlb_omega) << ',' << r.n_trials << ','
        << format_double(r.se_channel) << ',' << format_double(r.se_omega) << ',' << format_double(r.mse_slope)
        << ',' << format_double(r.mse_offset) << ',' << format_double(r.mse_omega_cumulative) << ','
        << format_double(r.mse_channel_aligned) << ',' << format_double(r.prior_bound_fraction) << ','
        << db(r.mse_channel) << ',' << db(r.mse_omega) << ',' << db(r.crlb_channel) << ',' << db(r.crlb_omega)
        << '\n';
}

void write_csv_file(const std::filesystem::path& path, const MetricTable& rows) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    write_metric_csv(out, rows);
    if (!out) throw InputError("write failed on '" + path.string() + "'");
}

}  // namespace

void write_metric_csv(std::ostream& out, const MetricTable& rows) {
    out << "method,snr_db,setup,packet_index,mse_channel,mse_omega,crlb_channel,crlb_omega,n_trials,"
           "se_channel,se_omega,mse_slope,mse_offset,mse_omega_cumulative,mse_channel_aligned,"
           "prior_bound_fraction,mse_channel_db,mse_omega_db,crlb_channel_db,crlb_omega_db\n";
    for (const MetricRow& r : rows) write_row(out, r);
}

void write_outputs(const ExperimentSpec& spec, const MetricTable& table) {
    namespace fs = std::filesystem;
    const fs::path dir(spec.output_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create '" + dir.string() + "': " + ec.message());

    const AntennaSetup& primary = spec.antenna_setups.front();
    const int last = spec.sim.n_packets;
    const int early = std::min(10, last);
    MetricTable a, b, c;
    for (const MetricRow& r : table) {
        // Channel MSE against packet index on the primary array.
        if (r.setup == primary) a.push_back(r);
        // Phase MSE against SNR after `early` and `last` packets.
        if (r.setup == primary && (r.packet_index == early || r.packet_index == last)) b.push_back(r);
        // Antenna-setup comparison at the same packets.
        if (r.packet_index == early || r.packet_index == last) c.push_back(r);
    }
    write_csv_file(dir / "metrics.csv", table);
    write_csv_file(dir / "fig1a.csv", a);
    write_csv_file(dir / "fig1b.csv", b);
    write_csv_file(dir / "fig1c.csv", c);

    json manifest;
    manifest["spec"] = to_json(spec);
    manifest["files"] = {"metrics.csv", "fig1a.csv", "fig1b.csv", "fig1c.csv"};
    manifest["rows"] = table.size();
    const fs::path mpath = dir / "manifest.json";
    std::ofstream out(mpath);
    if (!out) throw InputError("cannot write '" + mpath.string() + "'");
    out << manifest.dump(2) << '\n';
    if (!out) throw InputError("write failed on '" + mpath.string() + "'");
}

}  // namespace csikf
