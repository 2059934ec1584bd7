#pragma once

// Data-parallel inner loops of the MAP phase search. Every routine has a
// scalar reference implementation; an AVX2/FMA variant is compiled when the
// toolchain supports it and chosen at runtime when the CPU does.
//
// Set CSIKF_KERNELS=scalar (or avx2) in the environment to force a variant.

#include <complex>
#include <cstddef>
#include <string_view>

namespace csikf::kernels {

using cplx = std::complex<double>;

/// Value and first two derivatives (in omega) of a phasor series.
struct PhasorSums {
    cplx value;
    cplx d1;
    cplx d2;
};

/// sum_k c[k] exp(j omega (first_freq + k)) together with its first and
/// second derivatives with respect to omega.
using PhasorSeriesFn = PhasorSums (*)(const cplx* coeffs, std::size_t n, int first_freq, double omega);

/// Diagonal sums of the Hermitian form conj(x) .* W .* x^T:
///   out[d] += sum_t conj(x[t + d]) W(t + d, t) x[t],   d = 0 .. n-1.
/// W is column-major n x n with leading dimension ld; only the lower
/// triangle (including the diagonal) is read.
using BandSumsFn = void (*)(const cplx* w, std::size_t n, std::size_t ld, const cplx* x, cplx* out);

struct KernelTable {
    std::string_view name;
    PhasorSeriesFn phasor_series;
    BandSumsFn band_sums;
};

const KernelTable& scalar_kernels();
/// nullptr when the AVX2 variant is not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_kernels();
/// The variant used by the library (resolved once, thread-safe).
const KernelTable& active_kernels();

}  // namespace csikf::kernels
