#include "csikf/simulator.hpp"

#include <cmath>
#include <string>

#include "csikf/errors.hpp"

namespace csikf {

RVector SimConfig::profile() const {
    if (tap_profile.size() == 0) return exponential_profile(pilots.channel_length());
    return tap_profile;
}

void SimConfig::validate() const {
    if (n_tx < 1 || n_rx < 1) throw InputError("SimConfig: antenna counts must be positive");
    if (n_packets < 1) throw InputError("SimConfig: n_packets must be at least 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw InputError("SimConfig: alpha must lie in (0, 1]");
    if (slope_support.lo > slope_support.hi || offset_support.lo > offset_support.hi)
        throw InputError("SimConfig: empty support interval");
    // A slope beyond +-pi turns the phase step between adjacent pilot indices
    // into its alias.
    if (slope_support.lo < -kPi || slope_support.hi > kPi)
        throw InputError("SimConfig: slope support exceeds [-pi, pi]");
    const RVector p = profile();
    if (p.size() != pilots.channel_length()) throw InputError("SimConfig: tap profile length != channel length");
    if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-12)
        throw InputError("SimConfig: tap profile must be nonnegative and sum to 1");
}

ChannelState draw_initial_channel(const SimConfig& cfg, Rng& rng) {
    const int n = cfg.num_channels();
    const RVector p = cfg.profile();
    ChannelState s;
    s.alpha = cfg.alpha;
    s.tap_power_profile = p.replicate(1, n);
    s.process_noise_vars = stationary_process_noise(cfg.alpha, p, n);
    s.taps = complex_normal(rng, s.tap_power_profile);
    return s;
}

PhaseDistortion draw_distortion(const SimConfig& cfg, Rng& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const double a = u01(rng);
    const double b = u01(rng);
    const double slope = cfg.slope_support.lo + a * cfg.slope_support.width();
    const double offset = cfg.offset_support.lo + b * cfg.offset_support.width();
    return PhaseDistortion(slope, offset, cfg.slope_support, cfg.offset_support);
}

SimTrace simulate(const SimConfig& cfg) {
    cfg.validate();
    Rng channel_rng = make_stream(cfg.seed, Stream::InitialChannel);
    Rng process_rng = make_stream(cfg.seed, Stream::ProcessNoise);
    Rng distortion_rng = make_stream(cfg.seed, Stream::Distortion);
    Rng noise_rng = make_stream(cfg.seed, Stream::ObservationNoise);

    const double noise_var = cfg.noise_var();
    const int q = cfg.pilots.num_pilots();
    const int n = cfg.num_channels();

    SimTrace trace;
    trace.true_channels.reserve(cfg.n_packets);
    trace.true_distortions.reserve(cfg.n_packets);
    trace.observations.reserve(cfg.n_packets);

    ChannelState state = draw_initial_channel(cfg, channel_rng);
    for (int k = 0; k < cfg.n_packets; ++k) {
        if (k > 0) state = ar1_step(state, complex_normal(process_rng, state.process_noise_vars));
        PhaseDistortion d = draw_distortion(cfg, distortion_rng);
        if (k == 0 && cfg.reference_first_packet)
            d = PhaseDistortion(0.0, 0.0, cfg.slope_support, cfg.offset_support);
        // Unit-variance draw scaled afterwards: the underlying sequence does
        // not depend on the SNR, so SNR sweeps share noise realisations.
        CMatrix w = complex_normal(noise_rng, q, n, 1.0) * std::sqrt(noise_var);
        trace.observations.push_back(observe(state, d, noise_var, cfg.pilots, w, k + 1));
        trace.true_channels.push_back(state);
        trace.true_distortions.push_back(d);
    }
    return trace;
}

SimTrace select_antennas(const SimTrace& trace, int full_n_rx, int n_tx, int n_rx) {
    if (n_tx < 1 || n_rx < 1 || n_rx > full_n_rx) throw InputError("select_antennas: invalid sub-array");
    std::vector<int> cols;
    for (int tx = 0; tx < n_tx; ++tx)
        for (int rx = 0; rx < n_rx; ++rx) cols.push_back(tx * full_n_rx + rx);
    if (!trace.observations.empty() && cols.back() >= trace.observations.front().num_channels())
        throw InputError("select_antennas: sub-array does not fit the trace");

    auto pick = [&](const auto& m) {
        std::decay_t<decltype(m)> out(m.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t j = 0; j < cols.size(); ++j) out.col(j) = m.col(cols[j]);
        return out;
    };

    SimTrace out;
    out.true_distortions = trace.true_distortions;
    for (const ChannelState& s : trace.true_channels) {
        ChannelState c = s;
        c.taps = pick(s.taps);
        c.process_noise_vars = pick(s.process_noise_vars);
        c.tap_power_profile = pick(s.tap_power_profile);
        out.true_channels.push_back(std::move(c));
    }
    for (const Observation& o : trace.observations) {
        Observation c = o;
        c.csi = pick(o.csi);
        out.observations.push_back(std::move(c));
    }
    return out;
}

}  // namespace csikf
