// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ismlab/oracle.hpp"
#include "ismlab/schedule.hpp"

#include <iosfwd>
#include <span>
#include <vector>

namespace ismlab {

/// sqrt(ab_t) x0 + sqrt(1 - ab_t) eps.
Vec add_noise(const NoiseSchedule& schedule, const Vec& x0, int t, const Vec& eps);

/// Single-step clean estimate (x_t - sqrt(1 - ab_t) eps) / sqrt(ab_t).
Vec pseudo_gt_single(const NoiseSchedule& schedule, const Vec& xt, int t, const Vec& eps);

/// One deterministic DDIM move from timestep `from` to `to` (either
/// direction) with a fixed epsilon:
/// sqrt(ab_to) * x0_hat(from) + sqrt(1 - ab_to) * eps.
Vec ddim_step(const NoiseSchedule& schedule, const Vec& x_from, int from, int to,
              const Vec& eps);

/// Latents along an increasing timestep grid produced by DDIM inversion.
/// eps_cache[i] is the unconditional prediction at (latents[i], timesteps[i])
/// that carried the latent to timesteps[i + 1].
struct LatentTrajectory {
    std::vector<int> timesteps;
    std::vector<Vec> latents;
    std::vector<Vec> eps_cache;

    std::size_t hops() const { return eps_cache.size(); }
    int final_timestep() const { return timesteps.back(); }
    const Vec& final_latent() const { return latents.back(); }

    /// Recomputes every hop from the cached epsilons and compares against the
    /// stored latents. Returns the largest absolute deviation, or +inf if the
    /// shape invariants are broken.
    double replay_error(const NoiseSchedule& schedule) const;
};

/// [0, stride, 2 stride, ..., t]; the last hop is the (possibly shorter)
/// remainder.
std::vector<int> stride_grid(int t, int stride);

/// stride_grid(t - interval, stride) followed by t, so the second-to-last
/// point is exactly s = t - interval.
std::vector<int> interval_grid(int t, int interval, int stride);

/// Inverts x0 along stride_grid(t, delta_S).
LatentTrajectory ddim_invert(const MixtureOracle& oracle, const NoiseSchedule& schedule,
                             const Vec& x0, int t, int delta_S,
                             const Label& label = kNullLabel);

/// Inverts `start` (the latent at timesteps.front()) along an explicit,
/// strictly increasing grid.
LatentTrajectory ddim_invert_along(const MixtureOracle& oracle, const NoiseSchedule& schedule,
                                   const Vec& start, std::span<const int> timesteps,
                                   const Label& label = kNullLabel);

/// Guided multi-step DDIM denoising from t to 0 in hops of `stride` (last
/// hop may be shorter).
Vec ddim_denoise(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& xt,
                 int t, int stride, const GuidanceSpec& guidance);

/// Guided DDIM denoising along a strictly decreasing grid. When `visited` is
/// non-null it receives (latent, guided eps) for every point the walk
/// evaluated, in walk order.
struct DenoiseVisit {
    int t;
    Vec latent;
    Vec eps;
};
Vec ddim_denoise_along(const MixtureOracle& oracle, const NoiseSchedule& schedule,
                       const Vec& start, std::span<const int> timesteps,
                       const GuidanceSpec& guidance,
                       std::vector<DenoiseVisit>* visited = nullptr);

/// Number of denoising hops (and oracle requests) from t to 0 at `stride`.
int denoise_hops(int t, int stride);

/// CSV dump: step_index, t, x_0, ..., x_{d-1}.
void write_trajectory_csv(std::ostream& out, const LatentTrajectory& trajectory);

} // namespace ismlab
