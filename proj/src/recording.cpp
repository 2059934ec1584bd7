#include "csikf/recording.hpp"

#include <cmath>
#include <ostream>

#include "csikf/csi_io.hpp"
#include "csikf/errors.hpp"
#include "csikf/rng.hpp"

namespace csikf {

std::vector<RecordingPacket> process_recording(const std::vector<Observation>& observations,
                                               const EstimatorConfig& cfg, const PilotSet& pilots) {
    std::vector<RecordingPacket> out;
    if (observations.empty()) return out;
    KalmanMapFilter filter(cfg, pilots);
    out.reserve(observations.size());
    for (const Observation& obs : observations) {
        const StepResult r = filter.step(obs);
        RecordingPacket p;
        p.packet_index = obs.packet_index;
        p.distortion = r.solution.distortion;
        p.degenerate_offset = r.solution.degenerate_offset;
        p.raw = obs.csi;
        p.recovered = pilots.dft() * r.state.estimate;
        out.push_back(std::move(p));
    }
    return out;
}

void write_recording(std::ostream& out, const std::vector<RecordingPacket>& packets, const PilotSet& pilots) {
    out << "packet,channel,pilot_index,raw_mag,raw_phase,rec_mag,rec_phase,est_slope,est_offset\n";
    for (const RecordingPacket& p : packets)
        for (int i = 0; i < p.raw.cols(); ++i)
            for (int m = 0; m < p.raw.rows(); ++m) {
                const cplx a = p.raw(m, i), b = p.recovered(m, i);
                out << p.packet_index << ',' << i << ',' << pilots.indices()[m] << ',' << format_double(std::abs(a))
                    << ',' << format_double(std::arg(a)) << ',' << format_double(std::abs(b)) << ','
                    << format_double(std::arg(b)) << ',' << format_double(p.distortion.slope) << ','
                    << format_double(p.distortion.offset) << '\n';
            }
}

SimTrace make_reflector_fixture(const ReflectorFixture& fx, const PilotSet& pilots) {
    const int l = pilots.channel_length();
    const int n = fx.num_channels();
    if (fx.n_packets < 1 || fx.period < 1 || n < 1) throw InputError("reflector fixture: bad sizes");
    if (fx.reflector_tap <= 0 || fx.reflector_tap >= l)
        throw InputError("reflector fixture: reflector tap must lie in 1..L-1");

    Rng init = make_stream(fx.seed, Stream::InitialChannel);
    Rng dist = make_stream(fx.seed, Stream::Distortion);
    Rng noise = make_stream(fx.seed, Stream::ObservationNoise);
    std::uniform_real_distribution<double> angle(-kPi, kPi);
    // Static multipath over all taps; the reflector adds a rotating component
    // on one of them.
    const RVector stat = exponential_profile(l);
    const CMatrix static_taps = complex_normal(init, stat.replicate(1, n));
    std::vector<double> reflect(n);
    for (int i = 0; i < n; ++i) reflect[i] = angle(init);
    const double a2 = fx.reflector_amplitude * fx.reflector_amplitude;
    const double scale = 1.0 / std::sqrt(1.0 + a2);
    RVector profile = stat * (scale * scale);
    profile(fx.reflector_tap) += 1.0 - scale * scale;

    SimConfig sc;
    sc.pilots = pilots;
    sc.slope_support = fx.slope_support;
    sc.offset_support = fx.offset_support;

    SimTrace trace;
    for (int k = 0; k < fx.n_packets; ++k) {
        ChannelState st;
        const double turn = 2.0 * kPi * k / fx.period;
        st.taps = scale * static_taps;
        for (int i = 0; i < n; ++i)
            st.taps(fx.reflector_tap, i) += std::polar(scale * fx.reflector_amplitude, reflect[i] + turn);
        st.alpha = 1.0;
        st.process_noise_vars = RMatrix::Zero(l, n);
        st.tap_power_profile = profile.replicate(1, n);
        PhaseDistortion d = draw_distortion(sc, dist);
        if (k == 0 && fx.reference_first_packet)
            d = PhaseDistortion(0.0, 0.0, fx.slope_support, fx.offset_support);
        const CMatrix w = std::sqrt(fx.noise_var()) * complex_normal(noise, pilots.num_pilots(), n, 1.0);
        trace.observations.push_back(observe(st, d, fx.noise_var(), pilots, w, k + 1));
        trace.true_channels.push_back(std::move(st));
        trace.true_distortions.push_back(d);
    }
    return trace;
}

EstimatorConfig reflector_estimator(const ReflectorFixture& fx, const PilotSet& pilots) {
    const int l = pilots.channel_length();
    const double amp = fx.reflector_amplitude / std::sqrt(1.0 + fx.reflector_amplitude * fx.reflector_amplitude);
    const double step = 2.0 * amp * std::sin(kPi / fx.period);  // |change| of the reflector tap per packet
    RMatrix pn = RMatrix::Zero(l, fx.num_channels());
    pn.row(fx.reflector_tap).setConstant(step * step);
    return EstimatorConfig::make(pilots, 1.0, pn, fx.noise_var(), fx.slope_support, fx.offset_support);
}

}  // namespace csikf
