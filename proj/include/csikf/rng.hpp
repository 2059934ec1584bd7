#pragma once

#include <cstdint>
#include <random>

#include "csikf/model.hpp"

namespace csikf {

/// Labels of the independent random sub-streams spawned from one root seed.
enum class Stream : std::uint64_t {
    InitialChannel = 1,
    ProcessNoise = 2,
    Distortion = 3,
    ObservationNoise = 4,
    Trial = 5,
};

/// SplitMix64 finaliser; used to derive decorrelated seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Seed of sub-stream `label` (and optional index) under `root`.
std::uint64_t derive_seed(std::uint64_t root, Stream label, std::uint64_t index = 0);

using Rng = std::mt19937_64;

inline Rng make_stream(std::uint64_t root, Stream label, std::uint64_t index = 0) {
    return Rng(derive_seed(root, label, index));
}

/// One draw of CN(0, var): independent real and imaginary parts of
/// variance var / 2.
cplx complex_normal(Rng& rng, double var);

/// Matrix of independent CN(0, var(r, c)) entries.
CMatrix complex_normal(Rng& rng, const RMatrix& var);
/// Matrix of independent CN(0, var) entries.
CMatrix complex_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols, double var);

}  // namespace csikf
