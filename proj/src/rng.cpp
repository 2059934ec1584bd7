#include "csikf/rng.hpp"

#include <cmath>

namespace csikf {

std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t root, Stream label, std::uint64_t index) {
    return mix_seed(mix_seed(mix_seed(root) ^ static_cast<std::uint64_t>(label)) + index);
}

cplx complex_normal(Rng& rng, double var) {
    // Zero variance must give an exact zero without consuming a different
    // number of draws, so the sequence stays aligned across profiles.
    std::normal_distribution<double> n01(0.0, 1.0);
    const double re = n01(rng);
    const double im = n01(rng);
    const double s = std::sqrt(var / 2.0);
    return {s * re, s * im};
}

CMatrix complex_normal(Rng& rng, const RMatrix& var) {
    CMatrix out(var.rows(), var.cols());
    for (Eigen::Index c = 0; c < var.cols(); ++c)
        for (Eigen::Index r = 0; r < var.rows(); ++r) out(r, c) = complex_normal(rng, var(r, c));
    return out;
}

CMatrix complex_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double var) {
    CMatrix out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = complex_normal(rng, var);
    return out;
}

}  // namespace csikf
