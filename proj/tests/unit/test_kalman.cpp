#include <doctest.h>

#include <cmath>
#include <random>

#include "csikf/crlb.hpp"
#include "csikf/errors.hpp"
#include "csikf/kalman_map.hpp"
#include "csikf/phase_likelihood.hpp"
#include "oracles.hpp"

using namespace csikf;

namespace {

EstimatorConfig default_cfg(double noise_var = 0.01, int n = 9) {
    const PilotSet p = PilotSet::default_layout();
    const double a = std::pow(0.5, 1e-3);
    return EstimatorConfig::make(p, a, stationary_process_noise(a, exponential_profile(8), n), noise_var);
}

// Noise-free observation of a random channel under d, with the filter
// prediction sitting exactly on the channel.
struct Exact {
    PilotSet pilots = PilotSet::default_layout();
    EstimatorConfig cfg;
    FilterState pred;
    Observation obs;
};

Exact exact_case(std::uint64_t seed, PhaseDistortion d, double p_scale = 0.0) {
    Exact e;
    e.cfg = default_cfg(0.01);
    e.pred = init_filter(e.cfg, e.pilots, 9);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    for (int i = 0; i < 9; ++i) {
        for (int l = 0; l < 8; ++l) e.pred.estimate(l, i) = {g(rng), g(rng)};
        e.pred.covariances[i] *= p_scale;
    }
    e.obs.csi = apply_distortion(e.pilots.dft() * e.pred.estimate, d, e.pilots);
    e.obs.noise_var = e.cfg.noise_var;
    e.obs.packet_index = 1;
    return e;
}

}  // namespace

TEST_CASE("default_interval_count") {
    const PilotSet p = PilotSet::default_layout();
    // 0.4 * 58 * 2 / pi = 14.77
    CHECK(default_interval_count(kDefaultSlopeSupport, p) == 15);
    CHECK(default_interval_count({0.0, 0.0}, p) == 1);
    CHECK(default_cfg().n_intervals == 15);
}

TEST_CASE("EstimatorConfig validation") {
    const PilotSet p = PilotSet::default_layout();
    EstimatorConfig c = default_cfg();
    CHECK_NOTHROW(c.validate(p));
    c.noise_var = 0.0;
    CHECK_THROWS_AS(c.validate(p), InputError);
    c = default_cfg();
    c.alpha = 1.5;
    CHECK_THROWS_AS(c.validate(p), InputError);
    c = default_cfg();
    c.process_noise_vars = RMatrix::Ones(7, 9);
    CHECK_THROWS_AS(c.validate(p), InputError);
    c = default_cfg();
    c.n_intervals = 0;
    CHECK_THROWS_AS(c.validate(p), InputError);
}

TEST_CASE("init_filter: zero estimate, identity covariance") {
    const PilotSet p = PilotSet::default_layout();
    const FilterState s = init_filter(default_cfg(), p, 9);
    CHECK(s.estimate.rows() == 8);
    CHECK(s.estimate.cols() == 9);
    CHECK(s.estimate.norm() == 0.0);
    REQUIRE(s.covariances.size() == 9);
    for (const auto& c : s.covariances) CHECK(c == CMatrix::Identity(8, 8));

    const PilotSet tiny = PilotSet::unchecked(4, {1}, 1);
    EstimatorConfig c1;
    c1.process_noise_vars = RMatrix::Zero(1, 1);
    const FilterState s1 = init_filter(c1, tiny, 1);
    CHECK(s1.estimate(0, 0) == cplx(0.0));
    CHECK(s1.covariances[0](0, 0) == cplx(1.0));
    CHECK_THROWS_AS(init_filter(c1, tiny, 0), InputError);
}

TEST_CASE("predict examples") {
    const PilotSet p = PilotSet::default_layout();
    EstimatorConfig c = default_cfg(0.01, 2);
    FilterState s = init_filter(c, p, 2);
    s.estimate.setConstant(cplx(1.0, -2.0));

    c.alpha = 1.0;
    c.process_noise_vars.setZero();
    FilterState out = predict(s, c);
    CHECK(out.estimate == s.estimate);
    CHECK(out.covariances[0] == s.covariances[0]);

    c.alpha = 0.0;
    c.process_noise_vars.setOnes();
    out = predict(s, c);
    CHECK(out.estimate.norm() == 0.0);
    CHECK((out.covariances[1] - CMatrix::Identity(8, 8)).norm() == 0.0);

    c.alpha = 0.9;
    c.process_noise_vars.setConstant(0.19);
    out = predict(s, c);
    CHECK((out.estimate - 0.9 * s.estimate).norm() < 1e-14);
    CHECK((out.covariances[0] - CMatrix::Identity(8, 8)).norm() < 1e-14);
}

TEST_CASE("nll: zero residual with zero covariance is zero") {
    const Exact e = exact_case(1, PhaseDistortion(0.05, 1.0));
    CHECK(nll(e.obs, e.pred, PhaseDistortion(0.05, 1.0), e.pilots, e.cfg) < 1e-9);
    CHECK(nll(e.obs, e.pred, PhaseDistortion(0.0, 0.0), e.pilots, e.cfg) > 1.0);
}

TEST_CASE("nll: scalar closed form") {
    // Q = L = N = 1, q = 0: gamma = 1 / (p + s2).
    const PilotSet tiny = PilotSet::unchecked(4, {0}, 1);
    EstimatorConfig c;
    c.process_noise_vars = RMatrix::Zero(1, 1);
    c.noise_var = 0.5;
    FilterState s = init_filter(c, tiny, 1);
    s.estimate(0, 0) = {1.0, 1.0};
    s.covariances[0](0, 0) = 2.0;
    Observation o;
    o.csi = CMatrix::Constant(1, 1, cplx(3.0, -1.0));
    const double off = 0.7;
    const cplx r = o.csi(0, 0) - std::polar(1.0, off) * s.estimate(0, 0);
    const double expect = std::norm(r) / 2.5;
    CHECK(nll(o, s, PhaseDistortion(0.0, off), tiny, c) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("nll matches the explicit-inverse oracle") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> us(-0.2, 0.2), uo(-kPi, kPi);
    for (int t = 0; t < 10; ++t) {
        oracle::Instance in = oracle::make_instance(100 + t, 20.0, 5);
        for (auto& cv : in.predicted.covariances) cv = oracle::random_psd(rng, 8, 1e-4, 1.0);
        const double s = us(rng), o = uo(rng);
        const double a = nll(in.obs, in.predicted, PhaseDistortion(s, o), in.sim.pilots, in.cfg);
        const double b = oracle::direct_nll(in.obs, in.predicted, s, o, in.sim.pilots, in.cfg.noise_var);
        CHECK(std::abs(a - b) <= 1e-10 * std::abs(b));
    }
}

TEST_CASE("nll with diagonal gamma covariance") {
    oracle::Instance in = oracle::make_instance(7, 20.0, 5);
    std::mt19937_64 rng(3);
    FilterState diag = in.predicted;
    for (std::size_t i = 0; i < in.predicted.covariances.size(); ++i) {
        in.predicted.covariances[i] = oracle::random_psd(rng, 8, 1e-3, 1.0);
        diag.covariances[i] = CMatrix(in.predicted.covariances[i].diagonal().asDiagonal());
    }
    in.cfg.gamma_covariance = GammaCovariance::Diagonal;
    const double a = nll(in.obs, in.predicted, PhaseDistortion(0.03, -1.0), in.sim.pilots, in.cfg);
    const double b = oracle::direct_nll(in.obs, diag, 0.03, -1.0, in.sim.pilots, in.cfg.noise_var);
    CHECK(std::abs(a - b) <= 1e-10 * b);
}

TEST_CASE("closed_form_offset recovers a noise-free offset") {
    for (double off : {-3.0, -0.5, 0.0, 1.2, 3.1}) {
        const Exact e = exact_case(2, PhaseDistortion(0.07, off));
        const OffsetSolution s = closed_form_offset(e.obs, e.pred, 0.07, e.pilots, e.cfg);
        CHECK_FALSE(s.degenerate);
        CHECK(std::abs(wrap_phase(s.offset - off)) < 1e-9);
    }
}

TEST_CASE("closed_form_offset: zero prediction is degenerate") {
    Exact e = exact_case(3, PhaseDistortion(0.0, 0.5), 1.0);
    e.pred.estimate.setZero();
    const OffsetSolution s = closed_form_offset(e.obs, e.pred, 0.0, e.pilots, e.cfg);
    CHECK(s.degenerate);
    CHECK(s.offset == 0.0);
}

TEST_CASE("closed_form_offset matches a fine grid") {
    for (int t = 0; t < 3; ++t) {
        const oracle::Instance in = oracle::make_instance(200 + t, 10.0, 3, 1, 3);
        const double slope = 0.02 * (t - 1);
        const OffsetSolution s = closed_form_offset(in.obs, in.predicted, slope, in.sim.pilots, in.cfg);
        auto g = [&](double o) { return nll(in.obs, in.predicted, PhaseDistortion(slope, o), in.sim.pilots, in.cfg); };
        // Coarse pass at 1e-3 over the circle, then 1e-5 around the best cell.
        double best = -kPi, gbest = g(best);
        for (double o = -kPi; o <= kPi; o += 1e-3)
            if (const double v = g(o); v < gbest) gbest = v, best = o;
        for (double o = best - 2e-3; o <= best + 2e-3; o += 1e-5)
            if (const double v = g(wrap_phase(o)); v < gbest) gbest = v, best = wrap_phase(o);
        CHECK(std::abs(wrap_phase(s.offset - best)) <= 1e-5);
        CHECK(g(s.offset) <= gbest + 1e-9);
    }
}

TEST_CASE("closed_form_offset respects a restricted support") {
    Exact e = exact_case(4, PhaseDistortion(0.0, 2.0));
    e.cfg.offset_support = {-0.5, 0.5};
    const OffsetSolution s = closed_form_offset(e.obs, e.pred, 0.0, e.pilots, e.cfg);
    CHECK(s.offset == doctest::Approx(0.5));
}

TEST_CASE("PhaseLikelihood agrees with nll and finite differences") {
    const oracle::Instance in = oracle::make_instance(300, 20.0, 10);
    const PhaseLikelihood pl(in.obs, in.predicted, in.sim.pilots, in.cfg);
    const double h = 1e-5;
    for (double w = -0.19; w < 0.19; w += 0.0237) {
        const auto pt = pl.profile(w);
        const double ref = nll(in.obs, in.predicted, PhaseDistortion(w, pt.offset), in.sim.pilots, in.cfg);
        CHECK(std::abs(pt.value - ref) <= 1e-9 * std::max(1.0, ref));
        const double fd1 = (pl.profile(w + h).value - pl.profile(w - h).value) / (2 * h);
        const double fd2 = (pl.profile(w + h).d1 - pl.profile(w - h).d1) / (2 * h);
        CHECK(std::abs(fd1 - pt.d1) <= 1e-4 * (std::abs(pt.d1) + 1.0));
        CHECK(std::abs(fd2 - pt.d2) <= 1e-4 * (std::abs(pt.d2) + 1.0));
    }
}

TEST_CASE("estimate_distortion recovers noise-free distortions") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> us(-0.2, 0.2), uo(-kPi, kPi);
    for (int t = 0; t < 20; ++t) {
        const PhaseDistortion d(us(rng), uo(rng));
        const Exact e = exact_case(40 + t, d);
        const MapSolution s = estimate_distortion(e.obs, e.pred, e.pilots, e.cfg);
        CHECK(std::abs(s.distortion.slope - d.slope) < 1e-6);
        CHECK(std::abs(wrap_phase(s.distortion.offset - d.offset)) < 1e-6);
        CHECK(s.nll_value < 1e-6);
    }
    const Exact z = exact_case(60, PhaseDistortion(0.0, 0.0));
    const MapSolution s = estimate_distortion(z.obs, z.pred, z.pilots, z.cfg);
    CHECK(std::abs(s.distortion.slope) < 1e-6);
    CHECK(std::abs(s.distortion.offset) < 1e-6);
}

TEST_CASE("estimate_distortion stays inside the supports") {
    Exact e = exact_case(61, PhaseDistortion(-0.15, 2.5));
    e.cfg.slope_support = {0.05, 0.1};
    e.cfg.offset_support = {0.0, 1.0};
    e.cfg.n_intervals = default_interval_count(e.cfg.slope_support, e.pilots);
    const MapSolution s = estimate_distortion(e.obs, e.pred, e.pilots, e.cfg);
    CHECK(e.cfg.slope_support.contains(s.distortion.slope));
    CHECK(e.cfg.offset_support.contains(s.distortion.offset));
}

TEST_CASE("estimate_distortion is no worse than a 400 x 400 grid") {
    for (int t = 0; t < 3; ++t) {
        const oracle::Instance in = oracle::make_instance(400 + t, 20.0, 20);
        const MapSolution s = estimate_distortion(in.obs, in.predicted, in.sim.pilots, in.cfg);
        const auto g = oracle::grid_nll_min(in.obs, in.predicted, in.sim.pilots, in.cfg.noise_var,
                                            in.cfg.slope_support, in.cfg.offset_support, 400, 400);
        CHECK(s.nll_value <= g.value + 1e-9);
        CHECK(std::abs(s.distortion.slope - g.slope) <= g.slope_step);
        CHECK(std::abs(wrap_phase(s.distortion.offset - g.offset)) <= g.offset_step);
    }
}

TEST_CASE("estimate_distortion is equivariant to a global phase") {
    const oracle::Instance in = oracle::make_instance(500, 20.0, 10);
    Observation rot = in.obs;
    const double phi = 0.9;
    rot.csi *= std::polar(1.0, phi);
    const MapSolution a = estimate_distortion(in.obs, in.predicted, in.sim.pilots, in.cfg);
    const MapSolution b = estimate_distortion(rot, in.predicted, in.sim.pilots, in.cfg);
    CHECK(std::abs(a.distortion.slope - b.distortion.slope) < 1e-8);
    CHECK(std::abs(wrap_phase(b.distortion.offset - a.distortion.offset - phi)) < 1e-8);
    const FilterState ua = update(in.obs, in.predicted, a, in.sim.pilots, in.cfg);
    const FilterState ub = update(rot, in.predicted, b, in.sim.pilots, in.cfg);
    CHECK((ua.estimate - ub.estimate).norm() < 1e-8 * ua.estimate.norm());
}

TEST_CASE("update examples") {
    const PilotSet p = PilotSet::default_layout();
    Exact e = exact_case(70, PhaseDistortion(0.0, 0.0), 1.0);
    e.obs.csi.setRandom();

    EstimatorConfig loud = e.cfg;
    loud.noise_var = 1e12;
    const FilterState a = update(e.obs, e.pred, PhaseDistortion(), p, loud);
    CHECK((a.estimate - e.pred.estimate).norm() < 1e-6 * e.pred.estimate.norm());
    CHECK((a.covariances[0] - e.pred.covariances[0]).norm() < 1e-6);

    FilterState frozen = e.pred;
    for (auto& c : frozen.covariances) c.setZero();
    const FilterState b = update(e.obs, frozen, PhaseDistortion(), p, e.cfg);
    CHECK(b.estimate == frozen.estimate);
    CHECK(b.covariances[3].norm() == 0.0);

    // Scalar: posterior p s2 / (p + s2).
    const PilotSet tiny = PilotSet::unchecked(4, {0}, 1);
    EstimatorConfig c;
    c.process_noise_vars = RMatrix::Zero(1, 1);
    c.noise_var = 0.5;
    FilterState s = init_filter(c, tiny, 1);
    s.covariances[0](0, 0) = 2.0;
    Observation o;
    o.csi = CMatrix::Constant(1, 1, cplx(1.0, 0.0));
    const FilterState u = update(o, s, PhaseDistortion(), tiny, c);
    CHECK(u.covariances[0](0, 0).real() == doctest::Approx(2.0 * 0.5 / 2.5).epsilon(1e-12));
    CHECK(u.estimate(0, 0).real() == doctest::Approx(2.0 / 2.5).epsilon(1e-12));
}

TEST_CASE("update keeps covariances Hermitian PSD") {
    const oracle::Instance in = oracle::make_instance(80, 0.0, 30);
    FilterState s = init_filter(in.cfg, in.sim.pilots, 9);
    for (int k = 0; k < 30; ++k) {
        s = step(in.trace.observations[k], s, in.cfg, in.sim.pilots).state;
        CHECK_NOTHROW(s.validate());
    }
}

TEST_CASE("step: frozen system stays put") {
    Exact e = exact_case(90, PhaseDistortion(0.0, 0.0));
    e.cfg.alpha = 1.0;
    e.cfg.process_noise_vars.setZero();
    FilterState s = e.pred;
    s.packet_index = 0;
    for (int k = 1; k <= 100; ++k) {
        e.obs.packet_index = k;
        const StepResult r = step(e.obs, s, e.cfg, e.pilots);
        CHECK(std::abs(r.solution.distortion.slope) < 1e-9);
        CHECK(std::abs(r.solution.distortion.offset) < 1e-9);
        s = r.state;
    }
    CHECK((s.estimate - e.pred.estimate).norm() < 1e-9);
}

TEST_CASE("step bridges missing packets and rejects reordering") {
    const oracle::Instance in = oracle::make_instance(95, 20.0, 3);
    FilterState s = init_filter(in.cfg, in.sim.pilots, 9);
    Observation o1 = in.trace.observations[0], o3 = in.trace.observations[1];
    o1.packet_index = 1;
    o3.packet_index = 3;
    s = step(o1, s, in.cfg, in.sim.pilots).state;
    const FilterState via_step = step(o3, s, in.cfg, in.sim.pilots).state;
    const FilterState p2 = predict(predict(s, in.cfg), in.cfg);
    const FilterState manual = update(o3, p2, estimate_distortion(o3, p2, in.sim.pilots, in.cfg), in.sim.pilots, in.cfg);
    CHECK((via_step.estimate - manual.estimate).norm() < 1e-12);
    CHECK(via_step.packet_index == 3);
    CHECK_THROWS_AS(step(o1, via_step, in.cfg, in.sim.pilots), InputError);
    CHECK_THROWS_AS(step(o3, via_step, in.cfg, in.sim.pilots), InputError);
}

TEST_CASE("FilterState::validate catches a broken covariance") {
    FilterState s = init_filter(default_cfg(), PilotSet::default_layout(), 2);
    CHECK_NOTHROW(s.validate());
    s.covariances[1](0, 1) = cplx(0.5, 0.0);
    CHECK_THROWS_AS(s.validate(), NumericError);
    s.covariances[1] = -CMatrix::Identity(8, 8);
    CHECK_THROWS_AS(s.validate(), NumericError);
}

TEST_CASE("oracle filter covariance equals the bound recursion") {
    SimConfig sim;
    sim.n_packets = 50;
    sim.snr_db = 20.0;
    const SimTrace tr = simulate(sim);
    const int n = sim.num_channels();
    const EstimatorConfig cfg = EstimatorConfig::make(
        sim.pilots, sim.alpha, stationary_process_noise(sim.alpha, sim.profile(), n), sim.noise_var());
    const CrlbTrace b = crlb_filter_trace(sim.pilots, sim.alpha, cfg.process_noise_vars, sim.noise_var(),
                                          tr.true_distortions, sim.n_packets);
    FilterState s = init_filter(cfg, sim.pilots, n);
    for (int k = 0; k < sim.n_packets; ++k) {
        s = step_known_distortion(tr.observations[k], s, tr.true_distortions[k], cfg, sim.pilots);
        CHECK(std::abs(s.covariance_trace() - b.scalar_bound_per_packet[k]) <= 1e-10 * b.scalar_bound_per_packet[k]);
        CHECK((s.covariances[4] - b.filtering[k][4]).norm() < 1e-10);
    }
}

TEST_CASE("KalmanMapFilter wraps step") {
    const oracle::Instance in = oracle::make_instance(99, 20.0, 4);
    KalmanMapFilter f(in.cfg, in.sim.pilots);
    FilterState s = init_filter(in.cfg, in.sim.pilots, 9);
    for (int k = 0; k < 4; ++k) {
        const StepResult r = f.step(in.trace.observations[k]);
        s = step(in.trace.observations[k], s, in.cfg, in.sim.pilots).state;
        CHECK(r.state.estimate == s.estimate);
    }
    CHECK(f.state().packet_index == 4);
}
