#pragma once

#include <cstdint>
#include <Eigen/Dense>

namespace tucksum {

// All numerics run in 64-bit floats; matrices are column-major Eigen types.
using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Seed plus stream index for reproducible, splittable Gaussian draws.
// Two RngSeeds with the same seed and different streams generate
// independent-looking sequences; equal (seed, stream) pairs reproduce the
// same matrix bit-for-bit on a given platform.
struct RngSeed {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    // Derive a child stream; used to hand one generator per mode, per node,
    // per trial, ... without coordinating offsets at call sites.
    [[nodiscard]] RngSeed substream(std::uint64_t salt) const;
};

} // namespace tucksum
