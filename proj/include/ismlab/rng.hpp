// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace ismlab {

/// Seeded random stream. A (seed, stream) pair selects an independent
/// substream, so e.g. timestep draws and noise draws of one run never share
/// state.
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer on the closed range [lo, hi].
    int uniform_int(int lo, int hi);

    double normal() { return normal_(engine_); }
    Eigen::VectorXd normal_vector(Eigen::Index n);

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace ismlab
