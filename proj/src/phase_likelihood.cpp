#include "csikf/phase_likelihood.hpp"

#include <cmath>

#include "csikf/errors.hpp"

namespace csikf {

CMatrix posterior_weight(const CMatrix& cov, const CMatrix& gram, double noise_var) {
    if (!(noise_var > 0.0) || !std::isfinite(noise_var))
        throw NumericError("posterior weight: noise variance must be positive and finite");
    CMatrix m = cov * gram;
    m.diagonal().array() += noise_var;
    CMatrix x = m.partialPivLu().solve(cov);
    if (!x.allFinite()) throw NumericError("posterior weight: singular innovation covariance");
    return 0.5 * (x + x.adjoint());
}

namespace {

double nearest_end(const Interval& support, double angle) {
    return std::abs(wrap_phase(angle - support.lo)) <= std::abs(wrap_phase(angle - support.hi)) ? support.lo
                                                                                                 : support.hi;
}

}  // namespace

PhaseLikelihood::PhaseLikelihood(const Observation& obs, const FilterState& predicted, const PilotSet& pilots,
                                 const EstimatorConfig& cfg, const kernels::KernelTable& kernels)
    : kernels_(&kernels), noise_var_(cfg.noise_var), offset_support_(cfg.offset_support) {
    const int n = obs.num_channels();
    if (obs.csi.rows() != pilots.num_pilots() || predicted.num_channels() != n ||
        predicted.estimate.rows() != pilots.channel_length() ||
        static_cast<int>(predicted.covariances.size()) != n)
        throw InputError("PhaseLikelihood: observation / prediction dimensions disagree");

    const CMatrix& gram = pilots.gram();
    const CMatrix& c = pilots.dft();
    const CMatrix& cd = pilots.dense_dft();
    const int dense = pilots.dense_size();
    const int q = pilots.num_pilots();

    std::vector<cplx> quad(dense, cplx{});
    std::vector<cplx> beta(dense, cplx{});
    CVector x = CVector::Zero(dense);
    CMatrix t(dense, dense);

    for (int i = 0; i < n; ++i) {
        CMatrix p = predicted.covariances[i];
        if (cfg.gamma_covariance == GammaCovariance::Diagonal) p = CMatrix(p.diagonal().asDiagonal());
        const CMatrix xw = posterior_weight(p, gram, noise_var_);

        const auto h = obs.csi.col(i);
        const CVector hp = predicted.estimate.col(i);
        const CVector w = gram * hp;
        const CVector xw_w = xw * w;
        constant_ += h.squaredNorm() + hp.dot(w).real() - w.dot(xw_w).real();

        const CVector ca = c * (hp - xw_w);
        for (int m = 0; m < q; ++m) {
            beta[pilots.dense_slot(m)] += h(m) * std::conj(ca(m));
            x(pilots.dense_slot(m)) = h(m);
        }

        const CMatrix cx = cd * xw;
        t.triangularView<Eigen::Lower>() = cx * cd.adjoint();
        kernels_->band_sums(t.data(), dense, static_cast<std::size_t>(t.outerStride()), x.data(), quad.data());
    }

    quad[0] *= 0.5;
    quad_coeffs_ = std::move(quad);
    cross_coeffs_.assign(beta.rbegin(), beta.rend());
    cross_first_freq_ = -pilots.max_index();
    no_reference_ = true;
    for (const cplx& b : cross_coeffs_)
        if (b != cplx{}) {
            no_reference_ = false;
            break;
        }
}

cplx PhaseLikelihood::phase_moment(double slope) const {
    return kernels_->phasor_series(cross_coeffs_.data(), cross_coeffs_.size(), cross_first_freq_, slope).value;
}

PhaseLikelihood::Point PhaseLikelihood::profile(double slope) const {
    const auto a = kernels_->phasor_series(quad_coeffs_.data(), quad_coeffs_.size(), 0, slope);
    const double quad = 2.0 * a.value.real();
    const double quad1 = 2.0 * a.d1.real();
    const double quad2 = 2.0 * a.d2.real();

    Point pt;
    pt.slope = slope;
    double value = constant_ - quad;
    double d1 = -quad1;
    double d2 = -quad2;

    if (no_reference_) {
        pt.degenerate = true;
        pt.offset = contains_circular(offset_support_, 0.0) ? 0.0 : wrap_phase(nearest_end(offset_support_, 0.0));
    } else {
        const auto z = kernels_->phasor_series(cross_coeffs_.data(), cross_coeffs_.size(), cross_first_freq_, slope);
        const double mag = std::abs(z.value);
        const double arg = std::arg(z.value);
        if (mag > 0.0 && contains_circular(offset_support_, arg)) {
            const double m1 = (std::conj(z.value) * z.d1).real() / mag;
            const double m2 = (std::norm(z.d1) + (std::conj(z.value) * z.d2).real()) / mag - m1 * m1 / mag;
            pt.offset = wrap_phase(arg);
            value -= 2.0 * mag;
            d1 -= 2.0 * m1;
            d2 -= 2.0 * m2;
        } else {
            const double o = mag > 0.0 ? nearest_end(offset_support_, arg) : offset_support_.clamp(0.0);
            const cplx rot = std::polar(1.0, -o);
            pt.offset = wrap_phase(o);
            pt.degenerate = mag == 0.0;
            value -= 2.0 * (rot * z.value).real();
            d1 -= 2.0 * (rot * z.d1).real();
            d2 -= 2.0 * (rot * z.d2).real();
        }
    }
    pt.value = value / noise_var_;
    pt.d1 = d1 / noise_var_;
    pt.d2 = d2 / noise_var_;
    return pt;
}

}  // namespace csikf
