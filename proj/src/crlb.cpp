#include "csikf/crlb.hpp"

#include <cmath>
#include <string>

#include "csikf/errors.hpp"

namespace csikf {

void PhaseCrlbInput::validate() const {
    if (!(noise_var > 0.0)) throw InputError("PhaseCrlbInput: noise variance must be positive");
    if (channel_covs.empty()) throw InputError("PhaseCrlbInput: no channels");
    const int l = pilots.channel_length();
    for (std::size_t i = 0; i < channel_covs.size(); ++i) {
        const CMatrix& s = channel_covs[i];
        if (s.rows() != l || s.cols() != l)
            throw InputError("PhaseCrlbInput: covariance " + std::to_string(i) + " is not L x L");
        if ((s - s.adjoint()).cwiseAbs().maxCoeff() > 1e-10)
            throw InputError("PhaseCrlbInput: covariance " + std::to_string(i) + " is not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(s, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-10)
            throw InputError("PhaseCrlbInput: covariance " + std::to_string(i) + " is not PSD");
    }
}

RMatrix fisher_matrix(const PhaseCrlbInput& inp) {
    inp.validate();
    const CMatrix& c = inp.pilots.dft();
    const RVector q = inp.pilots.index_vector();
    const CMatrix c1 = q.cast<cplx>().asDiagonal() * c;
    const CMatrix c2 = q.array().square().matrix().cast<cplx>().asDiagonal() * c;
    const CMatrix g0 = c.adjoint() * c;
    const CMatrix g1 = c.adjoint() * c1;
    const CMatrix g2 = c.adjoint() * c2;
    double f00 = 0, f01 = 0, f11 = 0;
    for (const CMatrix& s : inp.channel_covs) {
        f00 += (g2 * s).trace().real();
        f01 += (g1 * s).trace().real();
        f11 += (g0 * s).trace().real();
    }
    RMatrix f(2, 2);
    f << f00, f01, f01, f11;
    return (2.0 / inp.noise_var) * f;
}

double crlb_phase(const PhaseCrlbInput& inp) {
    const RMatrix f = fisher_matrix(inp);
    const double det = f(0, 0) * f(1, 1) - f(0, 1) * f(1, 0);
    const double scale = std::max(f(0, 0) * f(1, 1), 1e-300);
    if (!(det > 1e-12 * scale)) throw UnidentifiableError("crlb_phase: singular Fisher information");
    return (f(0, 0) + f(1, 1)) / det;
}

PhaseCrlbInput phase_crlb_input(const PilotSet& pilots, const RVector& profile, int n_channels, double noise_var) {
    if (profile.size() != pilots.channel_length()) throw InputError("phase_crlb_input: profile length is not L");
    PhaseCrlbInput inp{pilots, {}, noise_var};
    inp.channel_covs.assign(n_channels, CMatrix(profile.cast<cplx>().asDiagonal()));
    return inp;
}

CrlbTrace crlb_filter_trace(const PilotSet& pilots, double alpha, const RMatrix& process_noise_vars,
                            double noise_var, const std::vector<PhaseDistortion>& true_distortions,
                            int n_packets, bool keep_matrices) {
    const int l = pilots.channel_length();
    if (n_packets < 0 || static_cast<int>(true_distortions.size()) < n_packets)
        throw InputError("crlb_filter_trace: fewer distortions than packets");
    if (process_noise_vars.rows() != l || process_noise_vars.cols() < 1)
        throw InputError("crlb_filter_trace: process noise must be L x N");
    if (!(noise_var > 0.0)) throw InputError("crlb_filter_trace: noise variance must be positive");
    const int n = static_cast<int>(process_noise_vars.cols());

    CrlbTrace out;
    // Identity before the first prediction, as the filter's P_{0|0}.
    std::vector<CMatrix> j(n);
    for (int i = 0; i < n; ++i) {
        j[i] = alpha * alpha * CMatrix::Identity(l, l);
        j[i].diagonal() += process_noise_vars.col(i).cast<cplx>();
    }
    for (int k = 0; k < n_packets; ++k) {
        std::vector<CMatrix> filt(n), pred(n);
        double bound = 0.0;
        for (int i = 0; i < n; ++i) {
            // B^H B = S for every distortion, so J_{k|k} = s2 (s2 I + J S)^-1 J.
            CMatrix m = j[i] * pilots.gram();
            m.diagonal().array() += noise_var;
            CMatrix f = noise_var * m.partialPivLu().solve(j[i]);
            if (!f.allFinite()) throw NumericError("crlb_filter_trace: singular innovation covariance");
            f = 0.5 * (f + f.adjoint());
            bound += f.trace().real();
            CMatrix p = alpha * alpha * f;
            p.diagonal() += process_noise_vars.col(i).cast<cplx>();
            filt[i] = std::move(f);
            pred[i] = p;
            j[i] = std::move(p);
        }
        out.scalar_bound_per_packet.push_back(bound);
        if (keep_matrices) {
            out.filtering.push_back(std::move(filt));
            out.prediction.push_back(std::move(pred));
        }
    }
    return out;
}

}  // namespace csikf
