#pragma once

// Adaptive Kalman filter for distorted CSI. Each packet:
//   1. predict the time-domain channel with the AR(1) model,
//   2. estimate (slope, offset) by minimising the negative log-likelihood of
//      the observation given the prediction over the prior supports,
//   3. run the Kalman update with the measurement matrix evaluated at the
//      estimated distortion.
//
// Channels share the distortion but are otherwise independent; every channel
// keeps a full L x L error covariance.

#include <vector>

#include "csikf/model.hpp"

namespace csikf {

/// Which error covariance enters the MAP weighting matrix
/// gamma = (B P B^H + sigma_w^2 I)^-1.
enum class GammaCovariance {
    Full,      ///< the full predicted covariance
    Diagonal,  ///< its diagonal only
};

struct EstimatorConfig {
    double alpha = 1.0;
    RMatrix process_noise_vars;  ///< L x N per-tap process-noise variances
    double noise_var = 1.0;      ///< sigma_w^2
    Interval slope_support = kDefaultSlopeSupport;
    Interval offset_support = kDefaultOffsetSupport;
    int newton_max_iters = 50;
    double newton_tol = 1e-9;
    int n_intervals = 1;
    GammaCovariance gamma_covariance = GammaCovariance::Full;

    /// Config with the interval count set by default_interval_count().
    static EstimatorConfig make(const PilotSet& pilots, double alpha, RMatrix process_noise_vars,
                                double noise_var, Interval slope_support = kDefaultSlopeSupport,
                                Interval offset_support = kDefaultOffsetSupport);

    int num_channels() const { return static_cast<int>(process_noise_vars.cols()); }
    /// Throws InputError on inconsistent shapes or out-of-range settings.
    void validate(const PilotSet& pilots) const;
};

/// ceil(width * max|q| * 2 / pi): intervals no wider than a quarter period of
/// the fastest likelihood component.
int default_interval_count(const Interval& slope_support, const PilotSet& pilots);

struct FilterState {
    CMatrix estimate;                  ///< L x N
    std::vector<CMatrix> covariances;  ///< N matrices, L x L
    PhaseDistortion phase;             ///< distortion used by the last update
    long packet_index = 0;

    int num_channels() const { return static_cast<int>(estimate.cols()); }
    /// Sum of covariance traces.
    double covariance_trace() const;
    /// Throws NumericError unless every covariance is Hermitian within tol
    /// with eigenvalues >= -tol.
    void validate(double tol = 1e-10) const;
};

struct MapSolution {
    PhaseDistortion distortion;
    double nll_value = 0.0;
    int interval_index = 0;
    int iterations_used = 0;
    /// The prediction carries no phase reference; the offset (and, when the
    /// prediction is zero, the slope) was set to 0 clamped to its support.
    bool degenerate_offset = false;
};

struct OffsetSolution {
    double offset = 0.0;
    bool degenerate = false;
};

/// Zero estimate, identity covariances.
FilterState init_filter(const EstimatorConfig& cfg, const PilotSet& pilots, int n_channels);

/// estimate *= alpha, P_i = alpha^2 P_i + diag(process_noise_vars.col(i)).
FilterState predict(const FilterState& state, const EstimatorConfig& cfg);

/// sum_i (h_obs^i - mu^i)^H gamma^i (h_obs^i - mu^i) with mu^i = B h_pred^i.
double nll(const Observation& obs, const FilterState& predicted, const PhaseDistortion& d,
           const PilotSet& pilots, const EstimatorConfig& cfg);

/// Exact minimiser of the NLL over the offset at a fixed slope, restricted to
/// the offset support.
OffsetSolution closed_form_offset(const Observation& obs, const FilterState& predicted, double slope,
                                  const PilotSet& pilots, const EstimatorConfig& cfg);

/// Global NLL minimiser over slope_support x offset_support.
MapSolution estimate_distortion(const Observation& obs, const FilterState& predicted,
                                const PilotSet& pilots, const EstimatorConfig& cfg);

/// Kalman update with B evaluated at distortion d.
FilterState update(const Observation& obs, const FilterState& predicted, const PhaseDistortion& d,
                   const PilotSet& pilots, const EstimatorConfig& cfg);
FilterState update(const Observation& obs, const FilterState& predicted, const MapSolution& sol,
                   const PilotSet& pilots, const EstimatorConfig& cfg);

struct StepResult {
    FilterState state;
    MapSolution solution;
};

/// predict -> estimate_distortion -> update. Missing packet numbers are
/// bridged by extra prediction steps; indices must increase.
StepResult step(const Observation& obs, const FilterState& state, const EstimatorConfig& cfg,
                const PilotSet& pilots);

/// Same recursion with the distortion supplied instead of estimated.
FilterState step_known_distortion(const Observation& obs, const FilterState& state,
                                  const PhaseDistortion& d, const EstimatorConfig& cfg,
                                  const PilotSet& pilots);

/// Stateful convenience wrapper around step().
class KalmanMapFilter {
public:
    KalmanMapFilter(EstimatorConfig cfg, PilotSet pilots);

    StepResult step(const Observation& obs);
    const FilterState& state() const { return state_; }
    const EstimatorConfig& config() const { return cfg_; }
    const PilotSet& pilots() const { return pilots_; }

private:
    EstimatorConfig cfg_;
    PilotSet pilots_;
    FilterState state_;
};

}  // namespace csikf
