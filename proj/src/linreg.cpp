#include "csikf/linreg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "csikf/errors.hpp"

namespace csikf {

RMatrix unwrap_phase(const CMatrix& csi, const PilotSet& pilots) {
    if (csi.rows() != pilots.num_pilots()) throw InputError("unwrap_phase: row count does not match pilots");
    const auto& q = pilots.indices();
    std::vector<int> order(q.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return q[a] < q[b]; });

    RMatrix out = RMatrix::Constant(csi.rows(), csi.cols(), std::numeric_limits<double>::quiet_NaN());
    for (int i = 0; i < csi.cols(); ++i) {
        bool have_prev = false;
        double prev = 0.0;
        for (int m : order) {
            const cplx v = csi(m, i);
            if (v == cplx{}) continue;
            double p = std::arg(v);
            if (have_prev) p = prev + wrap_phase(p - prev);
            out(m, i) = p;
            prev = p;
            have_prev = true;
        }
    }
    return out;
}

RegressionResult linreg_sanitize(const Observation& obs, const PilotSet& pilots) {
    const RMatrix phase = unwrap_phase(obs.csi, pilots);
    const auto& q = pilots.indices();
    double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < phase.cols(); ++i)
        for (int m = 0; m < phase.rows(); ++m) {
            const double y = phase(m, i);
            if (std::isnan(y)) continue;
            const double x = q[m];
            n += 1;
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
    if (n < 2) throw InputError("linreg_sanitize: fewer than two usable pilots");
    const double den = n * sxx - sx * sx;
    RegressionResult r;
    // All usable points at one pilot index: no slope information.
    r.slope = den > 0.0 ? (n * sxy - sx * sy) / den : 0.0;
    r.intercept = (sy - r.slope * sx) / n;
    r.sanitized = apply_phase_ramp(obs.csi, -r.slope, -r.intercept, pilots);
    return r;
}

}  // namespace csikf
