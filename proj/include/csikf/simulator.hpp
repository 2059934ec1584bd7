#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "csikf/model.hpp"
#include "csikf/rng.hpp"

namespace csikf {

struct SimConfig {
    PilotSet pilots = PilotSet::default_layout();
    int n_tx = 3;
    int n_rx = 3;
    double alpha = std::pow(0.5, 1e-3);  // correlation halves after 1000 packets
    double snr_db = 20.0;
    int n_packets = 100;
    Interval slope_support = kDefaultSlopeSupport;
    Interval offset_support = kDefaultOffsetSupport;
    std::uint64_t seed = 1;
    /// Per-tap power profile shared by all channels; empty means the
    /// exponential default over the pilot set's channel length.
    RVector tap_profile;
    /// The first packet carries no distortion and fixes the phase reference
    /// the filter reports in.
    bool reference_first_packet = true;

    int num_channels() const { return n_tx * n_rx; }
    double noise_var() const { return noise_var_from_snr_db(snr_db); }
    RVector profile() const;
    /// Throws InputError when a field is out of range or the slope support
    /// leaves [-pi, pi].
    void validate() const;
};

struct SimTrace {
    std::vector<ChannelState> true_channels;
    std::vector<PhaseDistortion> true_distortions;
    std::vector<Observation> observations;

    std::size_t size() const { return observations.size(); }
};

ChannelState draw_initial_channel(const SimConfig& cfg, Rng& rng);
PhaseDistortion draw_distortion(const SimConfig& cfg, Rng& rng);

/// Full trajectory: AR(1) channel, i.i.d. per-packet distortions and
/// observation noise, each from its own sub-stream of cfg.seed. Packets are
/// numbered from 1.
SimTrace simulate(const SimConfig& cfg);

/// Restricts a trace generated for full_n_tx x full_n_rx antennas to the
/// n_tx x n_rx sub-array (channel column i = tx * n_rx + rx).
SimTrace select_antennas(const SimTrace& trace, int full_n_rx, int n_tx, int n_rx);

}  // namespace csikf
