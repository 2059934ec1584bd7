#include <doctest.h>

#include <cmath>
#include <sstream>

#include "csikf/errors.hpp"
#include "csikf/recording.hpp"

using namespace csikf;

TEST_CASE("reflector fixture: shape, power and periodicity") {
    const PilotSet p = PilotSet::default_layout();
    ReflectorFixture fx;
    const SimTrace t = make_reflector_fixture(fx, p);
    REQUIRE(t.size() == 256);
    CHECK(t.observations[0].num_channels() == 3);
    CHECK(t.observations[9].packet_index == 10);
    // The channel repeats after one revolution.
    for (int k = 0; k + fx.period < fx.n_packets; k += 17)
        CHECK((t.true_channels[k].taps - t.true_channels[k + fx.period].taps).norm() < 1e-12);
    // Only the reflector tap moves.
    const CMatrix diff = t.true_channels[5].taps - t.true_channels[4].taps;
    CHECK(diff.row(fx.reflector_tap).norm() > 0.0);
    CHECK(diff.norm() == doctest::Approx(diff.row(fx.reflector_tap).norm()));
    CHECK(t.true_channels[0].tap_power_profile.col(0).sum() == doctest::Approx(1.0));

    fx.reflector_tap = 0;
    CHECK_THROWS_AS(make_reflector_fixture(fx, p), InputError);
}

TEST_CASE("process_recording: zero distortion is estimated as zero") {
    const PilotSet p = PilotSet::default_layout();
    ReflectorFixture fx;
    fx.n_packets = 100;
    fx.slope_support = {0.0, 0.0};
    fx.offset_support = {0.0, 0.0};
    const SimTrace t = make_reflector_fixture(fx, p);
    ReflectorFixture est = fx;
    est.slope_support = kDefaultSlopeSupport;
    est.offset_support = kDefaultOffsetSupport;
    const auto out = process_recording(t.observations, reflector_estimator(est, p), p);
    REQUIRE(out.size() == 100);
    CHECK(out[0].degenerate_offset);
    for (const auto& r : out) {
        CHECK(std::abs(r.distortion.slope) < 1e-3);
        CHECK(std::abs(wrap_phase(r.distortion.offset)) < 1e-2);
    }
}

TEST_CASE("process_recording: recovered magnitudes track the observations") {
    const PilotSet p = PilotSet::default_layout();
    const ReflectorFixture fx;
    const SimTrace t = make_reflector_fixture(fx, p);
    const auto out = process_recording(t.observations, reflector_estimator(fx, p), p);
    const double floor = std::sqrt(fx.noise_var());
    for (std::size_t k = 10; k < out.size(); ++k) {
        const CMatrix& raw = out[k].raw;
        const double dev = (out[k].recovered.cwiseAbs() - raw.cwiseAbs()).norm() / std::sqrt(double(raw.size()));
        const double rms = raw.norm() / std::sqrt(double(raw.size()));
        CHECK(dev / rms < 2.0 * floor);
    }
}

TEST_CASE("write_recording layout") {
    const PilotSet p(16, {-3, -2, 2, 3}, 2);
    RecordingPacket r;
    r.packet_index = 7;
    r.distortion = PhaseDistortion(0.1, -0.5);
    r.raw = CMatrix::Constant(4, 1, cplx(0.0, 2.0));
    r.recovered = CMatrix::Constant(4, 1, cplx(-1.0, 0.0));
    std::ostringstream out;
    write_recording(out, {r}, p);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "packet,channel,pilot_index,raw_mag,raw_phase,rec_mag,rec_phase,est_slope,est_offset");
    std::getline(in, line);
    CHECK(line == "7,0,-3,2,1.5707963267948966,1,3.141592653589793,0.1,-0.5");
    int rows = 1;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 4);
}
