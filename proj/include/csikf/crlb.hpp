#pragma once

// Cramer-Rao bounds: the closed-form bound on (slope, offset) under perfect
// channel prediction, and the Riccati recursion bounding the channel
// estimate.

#include <vector>

#include "csikf/model.hpp"

namespace csikf {

struct PhaseCrlbInput {
    PilotSet pilots;
    std::vector<CMatrix> channel_covs;  ///< Sigma^i, L x L Hermitian PSD
    double noise_var = 1.0;

    /// Throws InputError on shape mismatch or a non-PSD covariance.
    void validate() const;
};

/// 2 x 2 Fisher information of (slope, offset); entry (0,0) is the slope term.
RMatrix fisher_matrix(const PhaseCrlbInput& inp);

/// Tr(I^-1). Throws UnidentifiableError when I is singular.
double crlb_phase(const PhaseCrlbInput& inp);

/// Convenience: Sigma^i = diag(profile) for n_channels channels.
PhaseCrlbInput phase_crlb_input(const PilotSet& pilots, const RVector& profile, int n_channels, double noise_var);

struct CrlbTrace {
    std::vector<std::vector<CMatrix>> filtering;   ///< J_{k|k}, per packet, per channel
    std::vector<std::vector<CMatrix>> prediction;  ///< J_{k+1|k}
    std::vector<double> scalar_bound_per_packet;   ///< sum_i Tr J^i_{k|k}
};

/// Recursion started from the identity before the first prediction step (the
/// filter's initial covariance) with B evaluated at the true distortions.
/// B enters only through B^H B = C^H C, so the values do not depend on them.
/// process_noise_vars is L x N (per tap, per channel).
CrlbTrace crlb_filter_trace(const PilotSet& pilots, double alpha, const RMatrix& process_noise_vars,
                            double noise_var, const std::vector<PhaseDistortion>& true_distortions,
                            int n_packets, bool keep_matrices = true);

}  // namespace csikf
