#pragma once

// Offline processing of a CSI recording, and a synthetic stand-in for a
// measurement with a rotating reflector.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "csikf/kalman_map.hpp"
#include "csikf/simulator.hpp"

namespace csikf {

struct RecordingPacket {
    long packet_index = 0;
    PhaseDistortion distortion;  ///< MAP estimate
    bool degenerate_offset = false;
    CMatrix raw;        ///< observed CSI, Q x N
    CMatrix recovered;  ///< C * H_{k|k}, Q x N
};

/// Runs the filter over the observations in order.
std::vector<RecordingPacket> process_recording(const std::vector<Observation>& observations,
                                               const EstimatorConfig& cfg, const PilotSet& pilots);

/// Long-format CSV: packet,channel,pilot_index,raw_mag,raw_phase,rec_mag,
/// rec_phase,est_slope,est_offset.
void write_recording(std::ostream& out, const std::vector<RecordingPacket>& packets, const PilotSet& pilots);

struct ReflectorFixture {
    int n_packets = 256;
    int period = 64;  ///< packets per reflector revolution
    int n_tx = 1;
    int n_rx = 3;
    int reflector_tap = 2;
    double reflector_amplitude = 0.5;  ///< relative to the static path
    double snr_db = 30.0;
    Interval slope_support = kDefaultSlopeSupport;
    Interval offset_support = kDefaultOffsetSupport;
    bool reference_first_packet = true;  ///< packet 1 undistorted, as in SimConfig
    std::uint64_t seed = 1;

    int num_channels() const { return n_tx * n_rx; }
    double noise_var() const { return noise_var_from_snr_db(snr_db); }
};

/// Static multipath (one draw from the exponential profile) plus a reflector
/// component on one tap whose phase turns once per period; i.i.d. distortions
/// and observation noise. Expected channel power is 1.
SimTrace make_reflector_fixture(const ReflectorFixture& fx, const PilotSet& pilots);

/// Estimator settings used for the fixture: alpha = 1 and process noise only
/// on the reflector tap, equal to its squared per-packet change. Noise on the
/// static taps would let a common rotation of the channel pass for an offset.
EstimatorConfig reflector_estimator(const ReflectorFixture& fx, const PilotSet& pilots);

}  // namespace csikf
