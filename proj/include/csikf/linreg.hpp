#pragma once

// Conventional phase sanitisation: unwrap the measured phase along the pilot
// index and remove a least-squares line fitted jointly over all channels.

#include "csikf/model.hpp"

namespace csikf {

struct RegressionResult {
    double slope = 0.0;      ///< radians per pilot index
    double intercept = 0.0;  ///< radians
    CMatrix sanitized;       ///< input rotated by e^{-j (intercept + slope q_m)}
};

/// Phase of every channel unwrapped in ascending pilot order with a pi jump
/// threshold. Zero entries are skipped and reported as NaN.
RMatrix unwrap_phase(const CMatrix& csi, const PilotSet& pilots);

/// Throws InputError when fewer than two nonzero entries are available.
RegressionResult linreg_sanitize(const Observation& obs, const PilotSet& pilots);

}  // namespace csikf
