// csikf: command-line front end.
//
//   csikf simulate        dump a simulated trace (observations + truth)
//   csikf run             Monte Carlo experiment from a JSON spec
//   csikf crlb            bound tables for a configuration
//   csikf process         filter a recorded CSI dump
//   csikf export-fixture  write the golden test fixtures
//
// Exit codes: 0 ok, 1 usage, 2 data/parse, 3 numeric.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csikf/crlb.hpp"
#include "csikf/csi_io.hpp"
#include "csikf/errors.hpp"
#include "csikf/experiment.hpp"
#include "csikf/kernels.hpp"
#include "csikf/recording.hpp"
#include "csikf/simulator.hpp"

namespace {

using namespace csikf;
using nlohmann::json;

enum Exit { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

// Thrown for bad flag values or an invalid spec; mapped to the usage code.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Spec fields that may be given as long flags. Every flag overrides the
// field of the same name in the spec file.
struct SpecFlags {
    std::string spec_path;
    std::optional<std::uint64_t> seed;
    std::optional<int> n_trials, n_packets, n_tx, n_rx, dft_size, channel_length, newton_max_iters,
        n_intervals;
    std::optional<std::string> parallelism, output_dir, gamma_covariance;
    std::optional<double> alpha, newton_tol;
    std::vector<double> snr_sweep_db, slope_support, offset_support, tap_profile;
    std::vector<int> pilot_indices;
    std::vector<std::string> antenna_setups, methods;
    std::optional<bool> reference_first_packet;

    void attach(CLI::App* app, bool with_output) {
        app->add_option("--spec", spec_path, "JSON spec file")->check(CLI::ExistingFile);
        app->add_option("--seed", seed, "root seed");
        app->add_option("--n_trials", n_trials);
        app->add_option("--n_packets", n_packets);
        app->add_option("--snr_sweep_db", snr_sweep_db, "comma-separated SNRs in dB")->delimiter(',');
        app->add_option("--antenna_setups", antenna_setups, "e.g. 3x3,2x2,1x3")->delimiter(',');
        app->add_option("--methods", methods, "kalman_map,linreg,oracle_kf")->delimiter(',');
        if (with_output) app->add_option("--output_dir", output_dir);
        app->add_option("--parallelism", parallelism, "worker threads or 'auto'");
        app->add_option("--n_tx", n_tx, "antennas of the simulated array");
        app->add_option("--n_rx", n_rx);
        app->add_option("--alpha", alpha);
        app->add_option("--slope_support", slope_support, "lo,hi")->delimiter(',')->expected(2);
        app->add_option("--offset_support", offset_support, "lo,hi")->delimiter(',')->expected(2);
        app->add_option("--dft_size", dft_size);
        app->add_option("--pilot_indices", pilot_indices)->delimiter(',');
        app->add_option("--channel_length", channel_length);
        app->add_option("--tap_profile", tap_profile)->delimiter(',');
        app->add_option("--reference_first_packet", reference_first_packet);
        app->add_option("--newton_max_iters", newton_max_iters);
        app->add_option("--newton_tol", newton_tol);
        app->add_option("--n_intervals", n_intervals, "0 = automatic");
        app->add_option("--gamma_covariance", gamma_covariance, "full or diagonal");
    }

    json overrides() const {
        json j = json::object();
        if (seed) j["seed"] = *seed;
        if (n_trials) j["n_trials"] = *n_trials;
        if (n_packets) j["n_packets"] = *n_packets;
        if (!snr_sweep_db.empty()) j["snr_sweep_db"] = snr_sweep_db;
        if (!antenna_setups.empty()) j["antenna_setups"] = antenna_setups;
        if (!methods.empty()) j["methods"] = methods;
        if (output_dir) j["output_dir"] = *output_dir;
        if (parallelism) {
            if (*parallelism == "auto") j["parallelism"] = "auto";
            else {
                try {
                    j["parallelism"] = std::stoi(*parallelism);
                } catch (const std::exception&) {
                    throw UsageError("--parallelism must be an integer or 'auto'");
                }
            }
        }
        if (n_tx) j["n_tx"] = *n_tx;
        if (n_rx) j["n_rx"] = *n_rx;
        if (alpha) j["alpha"] = *alpha;
        if (!slope_support.empty()) j["slope_support"] = slope_support;
        if (!offset_support.empty()) j["offset_support"] = offset_support;
        if (dft_size) j["dft_size"] = *dft_size;
        if (!pilot_indices.empty()) j["pilot_indices"] = pilot_indices;
        if (channel_length) j["channel_length"] = *channel_length;
        if (!tap_profile.empty()) j["tap_profile"] = tap_profile;
        if (reference_first_packet) j["reference_first_packet"] = *reference_first_packet;
        if (newton_max_iters) j["newton_max_iters"] = *newton_max_iters;
        if (newton_tol) j["newton_tol"] = *newton_tol;
        if (n_intervals) j["n_intervals"] = *n_intervals;
        if (gamma_covariance) j["gamma_covariance"] = *gamma_covariance;
        return j;
    }

    ExperimentSpec build() const {
        ExperimentSpec spec;
        if (!spec_path.empty()) {
            std::ifstream in(spec_path);
            if (!in) throw InputError("cannot open '" + spec_path + "'");
            json j;
            try {
                j = json::parse(in);
            } catch (const json::parse_error& e) {
                throw ParseError(spec_path + ": " + e.what(), 0);
            }
            spec = spec_from_json(j, spec);
        }
        try {
            spec = spec_from_json(overrides(), spec);
            spec.validate();
        } catch (const InputError& e) {
            throw UsageError(e.what());
        }
        return spec;
    }
};

void write_truth(std::ostream& out, const SimTrace& trace) {
    out << "packet,slope,offset\n";
    for (std::size_t k = 0; k < trace.size(); ++k)
        out << trace.observations[k].packet_index << ',' << format_double(trace.true_distortions[k].slope) << ','
            << format_double(trace.true_distortions[k].offset) << '\n';
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write '" + path + "'");
    return out;
}

int cmd_simulate(const SpecFlags& f, double snr_db, const std::string& out_path, const std::string& truth_path) {
    const ExperimentSpec spec = f.build();
    SimConfig sc = spec.sim;
    sc.snr_db = snr_db;
    const SimTrace trace = simulate(sc);
    if (out_path.empty() || out_path == "-") {
        write_csi(std::cout, trace.observations, sc.n_tx, sc.n_rx, sc.pilots);
    } else {
        write_csi(out_path, trace.observations, sc.n_tx, sc.n_rx, sc.pilots);
    }
    if (!truth_path.empty()) {
        auto out = open_out(truth_path);
        write_truth(out, trace);
    }
    return kOk;
}

int cmd_run(const SpecFlags& f) {
    if (!f.seed) throw UsageError("run: --seed is required");
    const ExperimentSpec spec = f.build();
    std::cerr << "run: " << spec.n_trials << " trials x " << spec.snr_sweep_db.size() << " SNRs on "
              << spec.worker_count() << " workers, kernels=" << kernels::active_kernels().name << '\n';
    const MetricTable table = run_experiment(spec);
    write_outputs(spec, table);
    std::cerr << "run: wrote " << table.size() << " rows to " << spec.output_dir << '\n';
    return kOk;
}

int cmd_crlb(const SpecFlags& f) {
    const ExperimentSpec spec = f.build();
    std::cout << "snr_db,setup,packet_index,crlb_channel,crlb_omega\n";
    for (double snr : spec.snr_sweep_db)
        for (const AntennaSetup& a : spec.antenna_setups) {
            const EstimatorConfig cfg = spec.estimator_config(snr, a);
            const std::vector<PhaseDistortion> zero(spec.sim.n_packets);
            const CrlbTrace ct = crlb_filter_trace(spec.sim.pilots, cfg.alpha, cfg.process_noise_vars, cfg.noise_var,
                                                   zero, spec.sim.n_packets, false);
            const double co =
                crlb_phase(phase_crlb_input(spec.sim.pilots, spec.sim.profile(), a.num_channels(), cfg.noise_var));
            for (int k = 0; k < spec.sim.n_packets; ++k)
                std::cout << format_double(snr) << ',' << a.label() << ',' << k + 1 << ','
                          << format_double(ct.scalar_bound_per_packet[k]) << ',' << format_double(co) << '\n';
        }
    return kOk;
}

int cmd_process(const SpecFlags& f, const std::string& input, const std::string& output, double snr_db,
                std::optional<double> process_noise) {
    const ExperimentSpec spec = f.build();
    const PilotSet& pilots = spec.sim.pilots;
    const IngestResult in = ingest_csi(input, kCsvFormat, pilots, noise_var_from_snr_db(snr_db));
    for (const auto& w : in.warnings) std::cerr << "process: " << w << '\n';
    if (in.observations.empty()) {
        std::cerr << "process: nothing to do\n";
        return kOk;
    }
    const int n = in.n_tx * in.n_rx;
    RMatrix pn = process_noise ? RMatrix::Constant(pilots.channel_length(), n, *process_noise)
                               : stationary_process_noise(spec.sim.alpha, spec.sim.profile(), n);
    EstimatorConfig cfg = EstimatorConfig::make(pilots, spec.sim.alpha, pn, noise_var_from_snr_db(snr_db),
                                                spec.sim.slope_support, spec.sim.offset_support);
    cfg.newton_max_iters = spec.estimator.newton_max_iters;
    cfg.newton_tol = spec.estimator.newton_tol;
    if (spec.estimator.n_intervals > 0) cfg.n_intervals = spec.estimator.n_intervals;
    cfg.gamma_covariance = spec.estimator.gamma_covariance;
    const auto packets = process_recording(in.observations, cfg, pilots);
    if (output.empty() || output == "-") {
        write_recording(std::cout, packets, pilots);
    } else {
        auto out = open_out(output);
        write_recording(out, packets, pilots);
    }
    std::cerr << "process: " << packets.size() << " packets\n";
    return kOk;
}

int cmd_export_fixture(const std::string& dir, std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw InputError("cannot create '" + dir + "': " + ec.message());
    const PilotSet pilots = PilotSet::default_layout();

    ReflectorFixture fx;
    fx.seed = seed;
    const SimTrace refl = make_reflector_fixture(fx, pilots);
    write_csi((fs::path(dir) / "reflector.csv").string(), refl.observations, fx.n_tx, fx.n_rx, pilots);
    {
        auto out = open_out((fs::path(dir) / "reflector_truth.csv").string());
        write_truth(out, refl);
    }

    SimConfig sc;
    sc.seed = seed;
    sc.n_packets = 5;
    const SimTrace trace = simulate(sc);
    write_csi((fs::path(dir) / "trace.csv").string(), trace.observations, sc.n_tx, sc.n_rx, pilots);
    {
        auto out = open_out((fs::path(dir) / "trace_truth.csv").string());
        write_truth(out, trace);
    }
    std::cerr << "export-fixture: wrote reflector.csv, trace.csv and truth files to " << dir << '\n';
    return kOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Kalman / MAP recovery of phase-distorted MIMO CSI"};
    app.require_subcommand(1);

    SpecFlags sim_flags, run_flags, crlb_flags, proc_flags;
    double sim_snr = 20.0, proc_snr = 20.0;
    std::string sim_out, sim_truth, proc_in, proc_out, fixture_dir = "fixtures";
    std::optional<double> proc_pn;
    std::uint64_t fixture_seed = 1;

    auto* sim = app.add_subcommand("simulate", "dump a simulated trace in the ingest format");
    sim_flags.attach(sim, false);
    sim->add_option("--snr_db", sim_snr, "SNR of the dumped trace");
    sim->add_option("--out", sim_out, "observation CSV ('-' for stdout)");
    sim->add_option("--truth", sim_truth, "CSV of the true distortions");

    auto* run = app.add_subcommand("run", "Monte Carlo experiment");
    run_flags.attach(run, true);

    auto* crlb = app.add_subcommand("crlb", "print filtering and phase bounds");
    crlb_flags.attach(crlb, false);

    auto* proc = app.add_subcommand("process", "filter a recorded CSI dump");
    proc_flags.attach(proc, false);
    proc->add_option("--input", proc_in, "CSI dump (packet,tx,rx,pilot_index,re,im)")->required();
    proc->add_option("--output", proc_out, "per-packet output CSV ('-' for stdout)");
    proc->add_option("--snr_db", proc_snr, "assumed SNR; sets the noise variance");
    proc->add_option("--process_noise", proc_pn, "per-tap process-noise variance (default: stationary)");

    auto* fix = app.add_subcommand("export-fixture", "write golden fixtures");
    fix->add_option("--dir", fixture_dir);
    fix->add_option("--seed", fixture_seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        if (*sim) return cmd_simulate(sim_flags, sim_snr, sim_out, sim_truth);
        if (*run) return cmd_run(run_flags);
        if (*crlb) return cmd_crlb(crlb_flags);
        if (*proc) return cmd_process(proc_flags, proc_in, proc_out, proc_snr, proc_pn);
        if (*fix) return cmd_export_fixture(fixture_dir, fixture_seed);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << '\n';
        return kData;
    } catch (const InputError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return kData;
    } catch (const NumericError& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return kNumeric;
    }
    return kUsage;
}
