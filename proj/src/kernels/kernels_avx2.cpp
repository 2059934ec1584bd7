// AVX2 + FMA kernels. Complex numbers stay interleaved (re, im) so a __m256d
// carries two of them; std::complex<double> has exactly that layout.
//
// Functions carry a target attribute instead of compiling the whole file with
// -mavx2, so inline library code instantiated here cannot leak AVX2
// instructions into the baseline build.

#include <immintrin.h>

#include <cmath>

#include "csikf/kernels.hpp"

namespace csikf::kernels {
#define CSIKF_AVX2 __attribute__((target("avx2,fma")))

namespace {

// a * b for two packed complex pairs.
CSIKF_AVX2 inline __m256d cmul(__m256d a, __m256d b) {
    const __m256d b_re = _mm256_movedup_pd(b);
    const __m256d b_im = _mm256_permute_pd(b, 0xF);
    const __m256d a_sw = _mm256_permute_pd(a, 0x5);
    return _mm256_fmaddsub_pd(a, b_re, _mm256_mul_pd(a_sw, b_im));
}

// conj(a) * b for two packed complex pairs.
CSIKF_AVX2 inline __m256d cmul_conj(__m256d a, __m256d b) {
    const __m256d a_re = _mm256_movedup_pd(a);
    const __m256d a_im = _mm256_permute_pd(a, 0xF);
    const __m256d b_sw = _mm256_permute_pd(b, 0x5);
    return _mm256_fmsubadd_pd(a_re, b, _mm256_mul_pd(a_im, b_sw));
}

CSIKF_AVX2 inline cplx hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    alignas(16) double out[2];
    _mm_store_pd(out, s);
    return {out[0], out[1]};
}

CSIKF_AVX2 inline __m256d load2(const cplx* p) { return _mm256_loadu_pd(reinterpret_cast<const double*>(p)); }

CSIKF_AVX2 inline __m256d phasor_pair(double omega, double f) {
    const double a0 = omega * f;
    const double a1 = omega * (f + 1.0);
    return _mm256_setr_pd(std::cos(a0), std::sin(a0), std::cos(a1), std::sin(a1));
}

// The phasors advance by complex multiplication with exp(2 j omega); they are
// re-seeded from cos/sin every kResync pairs to bound the rounding drift.
constexpr std::size_t kResync = 16;

CSIKF_AVX2 PhasorSums phasor_series_avx2(const cplx* coeffs, std::size_t n, int first_freq, double omega) {
    __m256d s0 = _mm256_setzero_pd();
    __m256d s1 = _mm256_setzero_pd();
    __m256d s2 = _mm256_setzero_pd();

    const double c2 = std::cos(2.0 * omega);
    const double sn2 = std::sin(2.0 * omega);
    const __m256d step = _mm256_setr_pd(c2, sn2, c2, sn2);
    const __m256d two = _mm256_set1_pd(2.0);

    double f = static_cast<double>(first_freq);
    __m256d fv = _mm256_setr_pd(f, f, f + 1.0, f + 1.0);
    __m256d w = phasor_pair(omega, f);

    std::size_t k = 0;
    std::size_t pairs = 0;
    for (; k + 2 <= n; k += 2, ++pairs) {
        if (pairs == kResync) {
            w = phasor_pair(omega, static_cast<double>(first_freq) + static_cast<double>(k));
            pairs = 0;
        }
        const __m256d t = cmul(load2(coeffs + k), w);
        s0 = _mm256_add_pd(s0, t);
        const __m256d ft = _mm256_mul_pd(fv, t);
        s1 = _mm256_add_pd(s1, ft);
        s2 = _mm256_fmadd_pd(fv, ft, s2);
        fv = _mm256_add_pd(fv, two);
        w = cmul(w, step);
    }

    cplx v0 = hsum(s0), v1 = hsum(s1), v2 = hsum(s2);
    for (; k < n; ++k) {
        const double fk = static_cast<double>(first_freq) + static_cast<double>(k);
        const cplx t = coeffs[k] * std::polar(1.0, omega * fk);
        v0 += t;
        v1 += fk * t;
        v2 += fk * fk * t;
    }
    return {v0, cplx(0.0, 1.0) * v1, -v2};
}

CSIKF_AVX2 void band_sums_avx2(const cplx* w, std::size_t n, std::size_t ld, const cplx* x, cplx* out) {
    for (std::size_t t = 0; t < n; ++t) {
        const cplx xt = x[t];
        if (xt == cplx{}) continue;
        const cplx* col = w + t * ld + t;
        const cplx* xs = x + t;
        const __m256d xtv = _mm256_setr_pd(xt.real(), xt.imag(), xt.real(), xt.imag());
        const std::size_t len = n - t;
        std::size_t d = 0;
        for (; d + 2 <= len; d += 2) {
            const __m256d p = cmul(load2(col + d), xtv);
            const __m256d acc = _mm256_add_pd(load2(out + d), cmul_conj(load2(xs + d), p));
            _mm256_storeu_pd(reinterpret_cast<double*>(out + d), acc);
        }
        for (; d < len; ++d) out[d] += std::conj(xs[d]) * col[d] * xt;
    }
}

}  // namespace

const KernelTable& avx2_kernel_table() {
    static const KernelTable table{"avx2", &phasor_series_avx2, &band_sums_avx2};
    return table;
}

}  // namespace csikf::kernels
