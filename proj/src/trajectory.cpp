// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/trajectory.hpp"

#include "ismlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace ismlab {

namespace {

void
require_noisy_timestep(const NoiseSchedule& schedule, int t) {
    if (t < 1 || t > schedule.steps()) {
        throw IndexError("timestep " + std::to_string(t) + " outside [1, " +
                         std::to_string(schedule.steps()) + "]");
    }
}

void
require_same_size(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw DimensionError("vector dimensions differ");
}

} // namespace

Vec
add_noise(const NoiseSchedule& schedule, const Vec& x0, int t, const Vec& eps) {
    require_noisy_timestep(schedule, t);
    require_same_size(x0, eps);
    return schedule.sqrt_alpha_bar(t) * x0 + schedule.sqrt_one_minus_alpha_bar(t) * eps;
}

Vec
pseudo_gt_single(const NoiseSchedule& schedule, const Vec& xt, int t, const Vec& eps) {
    require_noisy_timestep(schedule, t);
    require_same_size(xt, eps);
    return (xt - schedule.sqrt_one_minus_alpha_bar(t) * eps) / schedule.sqrt_alpha_bar(t);
}

Vec
ddim_step(const NoiseSchedule& schedule, const Vec& x_from, int from, int to, const Vec& eps) {
    require_same_size(x_from, eps);
    const Vec x0_hat =
        (x_from - schedule.sqrt_one_minus_alpha_bar(from) * eps) / schedule.sqrt_alpha_bar(from);
    return schedule.sqrt_alpha_bar(to) * x0_hat + schedule.sqrt_one_minus_alpha_bar(to) * eps;
}

double
LatentTrajectory::replay_error(const NoiseSchedule& schedule) const {
    if (timesteps.empty() || latents.size() != timesteps.size() ||
        eps_cache.size() + 1 != timesteps.size()) {
        return std::numeric_limits<double>::infinity();
    }
    double worst = 0.0;
    for (std::size_t i = 0; i + 1 < timesteps.size(); ++i) {
        if (timesteps[i + 1] <= timesteps[i]) return std::numeric_limits<double>::infinity();
        const Vec next = ddim_step(schedule, latents[i], timesteps[i], timesteps[i + 1],
                                   eps_cache[i]);
        worst = std::max(worst, (next - latents[i + 1]).cwiseAbs().maxCoeff());
    }
    return worst;
}

std::vector<int>
stride_grid(int t, int stride) {
    if (stride < 1) throw ConfigError("stride must be >= 1");
    if (t < 0) throw ConfigError("grid end must be >= 0");
    std::vector<int> grid{0};
    for (int k = stride; k < t; k += stride) grid.push_back(k);
    if (t > 0) grid.push_back(t);
    return grid;
}

std::vector<int>
interval_grid(int t, int interval, int stride) {
    if (interval < 1 || interval > t) {
        throw ConfigError("interval must satisfy 1 <= delta_T <= t");
    }
    const int s = t - interval;
    std::vector<int> grid = s == 0 ? std::vector<int>{0} : stride_grid(s, stride);
    grid.push_back(t);
    return grid;
}

LatentTrajectory
ddim_invert_along(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& start,
                  std::span<const int> timesteps, const Label& label) {
    if (timesteps.size() < 2) throw ConfigError("inversion grid needs at least two points");
    for (std::size_t i = 0; i < timesteps.size(); ++i) {
        if (timesteps[i] < 0 || timesteps[i] > schedule.steps()) {
            throw ConfigError("inversion grid point outside the schedule");
        }
        if (i > 0 && timesteps[i] <= timesteps[i - 1]) {
            throw ConfigError("inversion grid must be strictly increasing");
        }
    }

    LatentTrajectory traj;
    traj.timesteps.assign(timesteps.begin(), timesteps.end());
    traj.latents.reserve(timesteps.size());
    traj.eps_cache.reserve(timesteps.size() - 1);
    traj.latents.push_back(start);
    for (std::size_t i = 0; i + 1 < timesteps.size(); ++i) {
        const Vec& current = traj.latents.back();
        Vec eps = oracle.eps_predict(schedule, current, timesteps[i], label);
        Vec next = ddim_step(schedule, current, timesteps[i], timesteps[i + 1], eps);
        traj.eps_cache.push_back(std::move(eps));
        traj.latents.push_back(std::move(next));
    }
    return traj;
}

LatentTrajectory
ddim_invert(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& x0, int t,
            int delta_S, const Label& label) {
    if (t < 1 || t > schedule.steps()) throw ConfigError("inversion target t out of range");
    if (delta_S < 1 || delta_S > t) throw ConfigError("delta_S must satisfy 1 <= delta_S <= t");
    const auto grid = stride_grid(t, delta_S);
    return ddim_invert_along(oracle, schedule, x0, grid, label);
}

Vec
ddim_denoise_along(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& start,
                   std::span<const int> timesteps, const GuidanceSpec& guidance,
                   std::vector<DenoiseVisit>* visited) {
    if (timesteps.size() < 2) throw ConfigError("denoising grid needs at least two points");
    for (std::size_t i = 0; i < timesteps.size(); ++i) {
        if (timesteps[i] < 0 || timesteps[i] > schedule.steps()) {
            throw ConfigError("denoising grid point outside the schedule");
        }
        if (i > 0 && timesteps[i] >= timesteps[i - 1]) {
            throw ConfigError("denoising grid must be strictly decreasing");
        }
    }

    Vec x = start;
    for (std::size_t i = 0; i + 1 < timesteps.size(); ++i) {
        Vec eps = oracle.eps_guided(schedule, x, timesteps[i], guidance);
        Vec next = ddim_step(schedule, x, timesteps[i], timesteps[i + 1], eps);
        if (visited) visited->push_back({timesteps[i], std::move(x), std::move(eps)});
        x = std::move(next);
    }
    return x;
}

Vec
ddim_denoise(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& xt, int t,
             int stride, const GuidanceSpec& guidance) {
    if (t < 1 || t > schedule.steps()) throw ConfigError("denoising start t out of range");
    if (stride < 1 || stride > t) throw ConfigError("stride must satisfy 1 <= stride <= t");
    std::vector<int> grid;
    for (int k = t; k > 0; k -= stride) grid.push_back(k);
    grid.push_back(0);
    return ddim_denoise_along(oracle, schedule, xt, grid, guidance);
}

int
denoise_hops(int t, int stride) {
    if (stride < 1) throw ConfigError("stride must be >= 1");
    return (t + stride - 1) / stride;
}

void
write_trajectory_csv(std::ostream& out, const LatentTrajectory& trajectory) {
    const Eigen::Index d = trajectory.latents.empty() ? 0 : trajectory.latents.front().size();
    out << "step_index,t";
    for (Eigen::Index k = 0; k < d; ++k) out << ",x" << k;
    out << '\n';
    const auto precision = out.precision(17);
    for (std::size_t i = 0; i < trajectory.latents.size(); ++i) {
        out << i << ',' << trajectory.timesteps[i];
        for (Eigen::Index k = 0; k < d; ++k) out << ',' << trajectory.latents[i][k];
        out << '\n';
    }
    out.precision(precision);
}

} // namespace ismlab
