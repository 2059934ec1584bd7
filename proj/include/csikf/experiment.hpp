#pragma once

// Monte Carlo runner: per trial, one full-array trace is simulated and every
// antenna subset and method is evaluated on it. Per-trial errors are merged
// in trial order, so results do not depend on the worker count.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "csikf/kalman_map.hpp"
#include "csikf/simulator.hpp"

namespace csikf {

enum class Method { KalmanMap, Linreg, OracleKf };

std::string to_string(Method m);
/// Throws InputError for an unknown name.
Method method_from_string(const std::string& s);

struct AntennaSetup {
    int n_tx = 3;
    int n_rx = 3;

    int num_channels() const { return n_tx * n_rx; }
    std::string label() const;  ///< "3x3"
    bool operator==(const AntennaSetup&) const = default;
};

/// Parses "2x3".
AntennaSetup parse_setup(const std::string& s);

/// Estimator settings that are not taken from the simulation truth.
struct EstimatorOptions {
    int newton_max_iters = 50;
    double newton_tol = 1e-9;
    int n_intervals = 0;  ///< 0: default_interval_count
    GammaCovariance gamma_covariance = GammaCovariance::Full;
};

struct ExperimentSpec {
    SimConfig sim;  ///< n_tx x n_rx is the generated array; snr_db is replaced by the sweep
    EstimatorOptions estimator;
    int n_trials = 200;
    std::vector<double> snr_sweep_db{20.0};
    std::vector<AntennaSetup> antenna_setups{{3, 3}};
    std::vector<Method> methods{Method::KalmanMap, Method::Linreg, Method::OracleKf};
    std::string output_dir = "results";
    int parallelism = 0;  ///< 0: hardware concurrency

    /// Throws InputError when a field is out of range.
    void validate() const;
    /// Estimator with the true statistics of the simulation at one SNR.
    EstimatorConfig estimator_config(double snr_db, const AntennaSetup& setup) const;
    int worker_count() const;
};

nlohmann::json to_json(const ExperimentSpec& spec);
/// Fields absent from j keep their values in base. Throws InputError on
/// unknown keys or wrong types.
ExperimentSpec spec_from_json(const nlohmann::json& j, ExperimentSpec base = {});

struct MetricRow {
    Method method = Method::KalmanMap;
    double snr_db = 0.0;
    AntennaSetup setup;
    int packet_index = 0;  ///< 1-based
    double mse_channel = 0.0;
    double mse_omega = 0.0;
    double crlb_channel = 0.0;
    double crlb_omega = 0.0;
    int n_trials = 0;
    double se_channel = 0.0;  ///< Monte Carlo standard error of mse_channel
    double se_omega = 0.0;
    double mse_slope = 0.0;
    double mse_offset = 0.0;
    double mse_omega_cumulative = 0.0;  ///< mean of mse_omega over packets 1..k
    /// Channel error after removing the best common phase rotation of each
    /// estimate.
    double mse_channel_aligned = 0.0;
    /// Fraction of trials whose slope estimate sits on a support endpoint.
    double prior_bound_fraction = 0.0;
};

using MetricTable = std::vector<MetricRow>;

/// Finds the row, or throws InputError.
const MetricRow& find_row(const MetricTable& t, Method m, double snr_db, const AntennaSetup& setup,
                          int packet_index);

MetricTable run_experiment(const ExperimentSpec& spec);

/// Writes metrics.csv, fig1a.csv, fig1b.csv, fig1c.csv and manifest.json into
/// spec.output_dir (created if needed). Throws InputError naming the path on
/// I/O failure.
void write_outputs(const ExperimentSpec& spec, const MetricTable& table);

void write_metric_csv(std::ostream& out, const MetricTable& rows);

}  // namespace csikf
