#include "csikf/kalman_map.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csikf/errors.hpp"
#include "csikf/phase_likelihood.hpp"

namespace csikf {

int default_interval_count(const Interval& slope_support, const PilotSet& pilots) {
    const double n = slope_support.width() * pilots.max_abs_index() * 2.0 / kPi;
    return std::max(1, static_cast<int>(std::ceil(n - 1e-12)));
}

EstimatorConfig EstimatorConfig::make(const PilotSet& pilots, double alpha, RMatrix process_noise_vars,
                                      double noise_var, Interval slope_support, Interval offset_support) {
    EstimatorConfig cfg;
    cfg.alpha = alpha;
    cfg.process_noise_vars = std::move(process_noise_vars);
    cfg.noise_var = noise_var;
    cfg.slope_support = slope_support;
    cfg.offset_support = offset_support;
    cfg.n_intervals = default_interval_count(slope_support, pilots);
    return cfg;
}

void EstimatorConfig::validate(const PilotSet& pilots) const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw InputError("EstimatorConfig: alpha must lie in [0, 1]");
    if (!(noise_var > 0.0) || !std::isfinite(noise_var))
        throw InputError("EstimatorConfig: noise variance must be positive and finite");
    if (process_noise_vars.rows() != pilots.channel_length() || process_noise_vars.cols() < 1)
        throw InputError("EstimatorConfig: process noise must be L x N");
    if ((process_noise_vars.array() < 0.0).any()) throw InputError("EstimatorConfig: negative process noise");
    if (slope_support.lo > slope_support.hi || offset_support.lo > offset_support.hi)
        throw InputError("EstimatorConfig: empty support");
    if (newton_max_iters < 1) throw InputError("EstimatorConfig: newton_max_iters must be >= 1");
    if (!(newton_tol > 0.0)) throw InputError("EstimatorConfig: newton_tol must be positive");
    if (n_intervals < 1) throw InputError("EstimatorConfig: n_intervals must be >= 1");
}

double FilterState::covariance_trace() const {
    double t = 0.0;
    for (const CMatrix& p : covariances) t += p.trace().real();
    return t;
}

void FilterState::validate(double tol) const {
    if (static_cast<int>(covariances.size()) != num_channels())
        throw NumericError("FilterState: covariance count does not match channel count");
    for (std::size_t i = 0; i < covariances.size(); ++i) {
        const CMatrix& p = covariances[i];
        if ((p - p.adjoint()).cwiseAbs().maxCoeff() > tol)
            throw NumericError("FilterState: covariance " + std::to_string(i) + " is not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(p, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -tol)
            throw NumericError("FilterState: covariance " + std::to_string(i) + " is not PSD");
    }
}

FilterState init_filter(const EstimatorConfig& cfg, const PilotSet& pilots, int n_channels) {
    if (n_channels < 1) throw InputError("init_filter: need at least one channel");
    FilterState s;
    const int l = pilots.channel_length();
    s.estimate = CMatrix::Zero(l, n_channels);
    s.covariances.assign(n_channels, CMatrix::Identity(l, l));
    s.phase.slope_support = cfg.slope_support;
    s.phase.offset_support = cfg.offset_support;
    s.packet_index = 0;
    return s;
}

FilterState predict(const FilterState& state, const EstimatorConfig& cfg) {
    if (cfg.process_noise_vars.cols() != state.num_channels() ||
        cfg.process_noise_vars.rows() != state.estimate.rows())
        throw InputError("predict: process noise shape does not match the filter state");
    FilterState out = state;
    out.estimate = cfg.alpha * state.estimate;
    const double a2 = cfg.alpha * cfg.alpha;
    for (int i = 0; i < state.num_channels(); ++i) {
        out.covariances[i] = a2 * state.covariances[i];
        out.covariances[i].diagonal() += cfg.process_noise_vars.col(i).cast<cplx>();
    }
    return out;
}

namespace {

void check_dims(const Observation& obs, const FilterState& state, const PilotSet& pilots, const char* who) {
    if (obs.csi.rows() != pilots.num_pilots())
        throw InputError(std::string(who) + ": observation has " + std::to_string(obs.csi.rows()) +
                         " rows, pilot set has " + std::to_string(pilots.num_pilots()));
    if (obs.num_channels() != state.num_channels() || state.estimate.rows() != pilots.channel_length())
        throw InputError(std::string(who) + ": observation and filter state disagree on dimensions");
}

CMatrix gamma_cov(const CMatrix& p, const EstimatorConfig& cfg) {
    if (cfg.gamma_covariance == GammaCovariance::Diagonal) return CMatrix(p.diagonal().asDiagonal());
    return p;
}

// u = C^H E(slope)^H h for every column of the observation.
CMatrix derotated_projection(const CMatrix& csi, double slope, const PilotSet& pilots) {
    return pilots.dft().adjoint() * apply_phase_ramp(csi, -slope, 0.0, pilots);
}

}  // namespace

double nll(const Observation& obs, const FilterState& predicted, const PhaseDistortion& d, const PilotSet& pilots,
           const EstimatorConfig& cfg) {
    check_dims(obs, predicted, pilots, "nll");
    const CMatrix b = apply_phase_ramp(pilots.dft(), d.slope, d.offset, pilots);
    const CMatrix& gram = pilots.gram();
    double total = 0.0;
    for (int i = 0; i < obs.num_channels(); ++i) {
        const CMatrix x = posterior_weight(gamma_cov(predicted.covariances[i], cfg), gram, cfg.noise_var);
        const CVector r = obs.csi.col(i) - b * predicted.estimate.col(i);
        const CVector v = b.adjoint() * r;
        total += r.squaredNorm() - v.dot(x * v).real();
    }
    if (!std::isfinite(total)) throw NumericError("nll: non-finite value");
    // The Woodbury form can dip a few ulps below zero for a vanishing residual.
    return std::max(0.0, total / cfg.noise_var);
}

OffsetSolution closed_form_offset(const Observation& obs, const FilterState& predicted, double slope,
                                  const PilotSet& pilots, const EstimatorConfig& cfg) {
    check_dims(obs, predicted, pilots, "closed_form_offset");
    const CMatrix u = derotated_projection(obs.csi, slope, pilots);
    const CMatrix& gram = pilots.gram();
    cplx z{};
    for (int i = 0; i < obs.num_channels(); ++i) {
        const CMatrix x = posterior_weight(gamma_cov(predicted.covariances[i], cfg), gram, cfg.noise_var);
        const CVector hp = predicted.estimate.col(i);
        const CVector a = hp - x * (gram * hp);
        z += a.dot(u.col(i));
    }
    OffsetSolution out;
    const Interval& sup = cfg.offset_support;
    if (std::abs(z) == 0.0) {
        out.degenerate = true;
        out.offset = wrap_phase(sup.clamp(0.0));
        return out;
    }
    const double arg = std::arg(z);
    if (contains_circular(sup, arg)) {
        out.offset = wrap_phase(arg);
    } else {
        const bool lower = std::abs(wrap_phase(arg - sup.lo)) <= std::abs(wrap_phase(arg - sup.hi));
        out.offset = wrap_phase(lower ? sup.lo : sup.hi);
    }
    return out;
}

MapSolution estimate_distortion(const Observation& obs, const FilterState& predicted, const PilotSet& pilots,
                                const EstimatorConfig& cfg) {
    check_dims(obs, predicted, pilots, "estimate_distortion");
    const PhaseLikelihood lk(obs, predicted, pilots, cfg);
    const Interval& sup = cfg.slope_support;
    if (!lk.has_reference()) {
        MapSolution sol;
        sol.distortion = PhaseDistortion(sup.clamp(0.0), wrap_phase(cfg.offset_support.clamp(0.0)), sup,
                                         cfg.offset_support);
        sol.degenerate_offset = true;
        sol.nll_value = nll(obs, predicted, sol.distortion, pilots, cfg);
        return sol;
    }
    const int n = sup.width() > 0.0 ? cfg.n_intervals : 1;
    const double width = sup.width() / n;

    std::vector<PhaseLikelihood::Point> ends(n + 1);
    for (int j = 0; j <= n; ++j) ends[j] = lk.profile(j == n ? sup.hi : sup.lo + j * width);

    PhaseLikelihood::Point best = ends[0];
    int best_interval = 0;
    int best_iters = 0;
    auto consider = [&](const PhaseLikelihood::Point& p, int interval, int iters) {
        if (p.value < best.value) {
            best = p;
            best_interval = interval;
            best_iters = iters;
        }
    };

    for (int j = 0; j < n; ++j) {
        const auto& a = ends[j];
        const auto& b = ends[j + 1];
        consider(a, j, 0);
        consider(b, j, 0);
        // An interior minimum exists only where the derivative changes sign
        // from negative to positive.
        if (!(a.d1 < 0.0 && b.d1 > 0.0)) continue;

        double lo = a.slope, hi = b.slope;
        double x = 0.5 * (lo + hi);
        int iters = 0;
        for (; iters < cfg.newton_max_iters; ++iters) {
            const auto p = lk.profile(x);
            consider(p, j, iters + 1);
            if (p.d1 < 0.0) lo = x;
            else hi = x;
            double next = (p.d2 > 0.0) ? x - p.d1 / p.d2 : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - x) < cfg.newton_tol) {
                consider(lk.profile(next), j, iters + 1);
                ++iters;
                break;
            }
            x = next;
        }
    }

    MapSolution sol;
    sol.distortion = PhaseDistortion(sup.clamp(best.slope), best.offset, sup, cfg.offset_support);
    sol.interval_index = best_interval;
    sol.iterations_used = best_iters;
    sol.degenerate_offset = best.degenerate;
    sol.nll_value = nll(obs, predicted, sol.distortion, pilots, cfg);
    return sol;
}

FilterState update(const Observation& obs, const FilterState& predicted, const PhaseDistortion& d,
                   const PilotSet& pilots, const EstimatorConfig& cfg) {
    check_dims(obs, predicted, pilots, "update");
    const CMatrix& gram = pilots.gram();
    // B^H h_obs = e^{-j offset} C^H E^H h_obs
    const CMatrix bh = std::polar(1.0, -d.offset) * derotated_projection(obs.csi, d.slope, pilots);

    FilterState out = predicted;
    for (int i = 0; i < obs.num_channels(); ++i) {
        const CMatrix& p = predicted.covariances[i];
        const CMatrix x = posterior_weight(p, gram, cfg.noise_var);
        const CVector hp = predicted.estimate.col(i);
        out.estimate.col(i) = hp + x * (bh.col(i) - gram * hp);
        // P - X S P = s2 X, without the cancellation of the difference form.
        out.covariances[i] = cfg.noise_var * x;
    }
    out.phase = d;
    out.packet_index = obs.packet_index;
    return out;
}

FilterState update(const Observation& obs, const FilterState& predicted, const MapSolution& sol,
                   const PilotSet& pilots, const EstimatorConfig& cfg) {
    return update(obs, predicted, sol.distortion, pilots, cfg);
}

namespace {

FilterState predict_to(const Observation& obs, const FilterState& state, const EstimatorConfig& cfg) {
    // packet_index 0 marks a state that has seen no packet yet.
    long gap = 1;
    if (state.packet_index != 0) {
        gap = obs.packet_index - state.packet_index;
        if (gap < 1)
            throw InputError("step: packet index " + std::to_string(obs.packet_index) +
                             " does not follow " + std::to_string(state.packet_index));
    }
    FilterState s = predict(state, cfg);
    for (long g = 1; g < gap; ++g) s = predict(s, cfg);
    return s;
}

}  // namespace

StepResult step(const Observation& obs, const FilterState& state, const EstimatorConfig& cfg,
                const PilotSet& pilots) {
    const FilterState predicted = predict_to(obs, state, cfg);
    MapSolution sol = estimate_distortion(obs, predicted, pilots, cfg);
    FilterState updated = update(obs, predicted, sol, pilots, cfg);
    return {std::move(updated), std::move(sol)};
}

FilterState step_known_distortion(const Observation& obs, const FilterState& state, const PhaseDistortion& d,
                                  const EstimatorConfig& cfg, const PilotSet& pilots) {
    return update(obs, predict_to(obs, state, cfg), d, pilots, cfg);
}

KalmanMapFilter::KalmanMapFilter(EstimatorConfig cfg, PilotSet pilots)
    : cfg_(std::move(cfg)), pilots_(std::move(pilots)) {
    cfg_.validate(pilots_);
    state_ = init_filter(cfg_, pilots_, cfg_.num_channels());
}

StepResult KalmanMapFilter::step(const Observation& obs) {
    StepResult r = csikf::step(obs, state_, cfg_, pilots_);
    state_ = r.state;
    return r;
}

}  // namespace csikf
