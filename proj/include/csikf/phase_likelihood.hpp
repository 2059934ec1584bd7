#pragma once

// The NLL of one packet reduced to a function of the slope alone.
//
// Writing X_i = (s2 I + P_i S)^-1 P_i (S = C^H C, s2 = sigma_w^2) and
// u_i(w) = C^H E(w)^H h_obs^i, the per-packet NLL is
//
//   s2 g(w, o) = K - sum_i u_i^H X_i u_i - 2 Re(e^{-jo} Z(w)),
//   Z(w) = sum_i a_i^H u_i,  a_i = (I - X_i S) h_pred^i.
//
// The offset minimiser is o* = arg Z. Both w-dependent terms are short
// trigonometric series in w (integer pilot indices), so their coefficients
// are formed once per packet and every evaluation is two phasor sums.

#include <vector>

#include "csikf/kalman_map.hpp"
#include "csikf/kernels.hpp"

namespace csikf {

/// L x L matrix (s2 I + P S)^-1 P, Hermitian PSD for Hermitian PSD P.
CMatrix posterior_weight(const CMatrix& cov, const CMatrix& gram, double noise_var);

class PhaseLikelihood {
public:
    struct Point {
        double slope = 0.0;
        double offset = 0.0;  ///< constrained offset minimiser at this slope
        double value = 0.0;   ///< NLL at (slope, offset)
        double d1 = 0.0;      ///< d/dslope of the profile
        double d2 = 0.0;      ///< d^2/dslope^2 of the profile
        bool degenerate = false;
    };

    PhaseLikelihood(const Observation& obs, const FilterState& predicted, const PilotSet& pilots,
                    const EstimatorConfig& cfg,
                    const kernels::KernelTable& kernels = kernels::active_kernels());

    /// min over the offset support of the NLL at this slope, with derivatives.
    Point profile(double slope) const;

    /// Z(slope); its argument is the unconstrained offset minimiser.
    cplx phase_moment(double slope) const;

    /// False when the prediction is zero and the NLL is flat in both phases.
    bool has_reference() const { return !no_reference_; }

private:
    const kernels::KernelTable* kernels_;
    double noise_var_;
    Interval offset_support_;
    double constant_ = 0.0;
    std::vector<cplx> quad_coeffs_;   // frequencies 0 .. D-1, entry 0 halved
    std::vector<cplx> cross_coeffs_;  // frequencies -max_q .. -min_q
    int cross_first_freq_ = 0;
    bool no_reference_ = false;
};

}  // namespace csikf
