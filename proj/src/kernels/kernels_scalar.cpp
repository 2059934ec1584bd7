// Reference kernels. Straightforward loops; every phasor is evaluated
// directly with std::polar so these double as the accuracy baseline for the
// vectorised variants.

#include "csikf/kernels.hpp"

namespace csikf::kernels {
namespace {

PhasorSums phasor_series_scalar(const cplx* coeffs, std::size_t n, int first_freq, double omega) {
    cplx s0{}, s1{}, s2{};
    for (std::size_t k = 0; k < n; ++k) {
        const double f = static_cast<double>(first_freq) + static_cast<double>(k);
        const cplx t = coeffs[k] * std::polar(1.0, omega * f);
        s0 += t;
        s1 += f * t;
        s2 += f * f * t;
    }
    return {s0, cplx(0.0, 1.0) * s1, -s2};
}

void band_sums_scalar(const cplx* w, std::size_t n, std::size_t ld, const cplx* x, cplx* out) {
    for (std::size_t t = 0; t < n; ++t) {
        const cplx* col = w + t * ld;
        const cplx xt = x[t];
        if (xt == cplx{}) continue;
        for (std::size_t d = 0; t + d < n; ++d) out[d] += std::conj(x[t + d]) * col[t + d] * xt;
    }
}

}  // namespace

const KernelTable& scalar_kernels() {
    static const KernelTable table{"scalar", &phasor_series_scalar, &band_sums_scalar};
    return table;
}

}  // namespace csikf::kernels
