// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/objectives.hpp"

#include "ismlab/errors.hpp"
#include "ismlab/trajectory.hpp"

#include <algorithm>
#include <ostream>
#include <string>

namespace ismlab {

std::string_view
to_string(Objective objective) {
    switch (objective) {
    case Objective::Ism: return "ism";
    case Objective::Sds: return "sds";
    case Objective::Naive: return "naive";
    }
    return "unknown";
}

Objective
objective_from_string(std::string_view name) {
    if (name == "ism") return Objective::Ism;
    if (name == "sds") return Objective::Sds;
    if (name == "naive") return Objective::Naive;
    throw ConfigError("unknown objective '" + std::string(name) + "'");
}

namespace {

void
require_timestep(const NoiseSchedule& schedule, int t) {
    if (t < 1 || t > schedule.steps()) {
        throw IndexError("timestep " + std::to_string(t) + " outside [1, " +
                         std::to_string(schedule.steps()) + "]");
    }
}

// Shared inversion + mirrored guided denoising used by the naive objective
// and the bias analysis. Both walks use the interval grid at stride delta_T.
struct MirroredWalk {
    LatentTrajectory inversion;
    std::vector<DenoiseVisit> visits; // visits[k] is grid point n - k
    Vec x0_tilde;
    std::uint64_t calls = 0;
};

MirroredWalk
mirrored_walk(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& x0, int t,
              int delta_T, const GuidanceSpec& guidance) {
    require_timestep(schedule, t);
    if (delta_T < 1 || delta_T > t) {
        throw ConfigError("delta_T must satisfy 1 <= delta_T <= t");
    }
    oracle.validate(guidance);
    const std::uint64_t before = oracle.request_count();

    MirroredWalk walk;
    const auto grid = interval_grid(t, delta_T, delta_T);
    walk.inversion = ddim_invert_along(oracle, schedule, x0, grid, kNullLabel);
    std::vector<int> reversed(grid.rbegin(), grid.rend());
    walk.x0_tilde = ddim_denoise_along(oracle, schedule, walk.inversion.final_latent(), reversed,
                                       guidance, &walk.visits);
    walk.calls = oracle.request_count() - before;
    return walk;
}

} // namespace

GradientReport
sds_gradient(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& x0, int t,
             const Vec& eps, const GuidanceSpec& guidance) {
    require_timestep(schedule, t);
    if (eps.size() != x0.size()) throw DimensionError("noise and view dimensions differ");
    const Vec xt = add_noise(schedule, x0, t, eps);
    const Vec eps_pred = oracle.eps_guided(schedule, xt, t, guidance);
    const double w = schedule.omega(t);

    GradientReport report;
    report.objective = Objective::Sds;
    const Vec residual = eps_pred - eps;
    report.grad_x0 = w * residual;
    report.pseudo_gt = pseudo_gt_single(schedule, xt, t, eps_pred);
    report.t = t;
    report.oracle_calls = 1;
    report.loss_proxy = w * residual.squaredNorm();
    return report;
}

GradientReport
ism_gradient(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& x0, int t,
             int delta_T, int delta_S, const GuidanceSpec& guidance) {
    require_timestep(schedule, t);
    if (delta_T < 1 || delta_T >= t) {
        throw ConfigError("delta_T must satisfy 1 <= delta_T < t");
    }
    const int s = t - delta_T;
    if (delta_S < 1 || delta_S > s) {
        throw ConfigError("delta_S must satisfy 1 <= delta_S <= t - delta_T");
    }
    oracle.validate(guidance);
    const std::uint64_t before = oracle.request_count();

    const auto grid = interval_grid(t, delta_T, delta_S);
    const LatentTrajectory traj = ddim_invert_along(oracle, schedule, x0, grid, kNullLabel);
    const Vec& eps_null_s = traj.eps_cache.back();
    const Vec eps_cond_t = oracle.eps_guided(schedule, traj.final_latent(), t, guidance);
    const Vec interval_score = eps_cond_t - eps_null_s;
    const double w = schedule.omega(t);

    GradientReport report;
    report.objective = Objective::Ism;
    report.grad_x0 = w * interval_score;
    report.pseudo_gt = x0 - schedule.gamma(t) * interval_score;
    report.t = t;
    report.s = s;
    report.oracle_calls = oracle.request_count() - before;
    report.loss_proxy = w * interval_score.squaredNorm();
    return report;
}

GradientReport
naive_gradient(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& x0, int t,
               int delta_T, const GuidanceSpec& guidance) {
    const MirroredWalk walk = mirrored_walk(oracle, schedule, x0, t, delta_T, guidance);
    const double w = schedule.omega(t);
    const Vec residual = (x0 - walk.x0_tilde) / schedule.gamma(t);

    GradientReport report;
    report.objective = Objective::Naive;
    report.grad_x0 = w * residual;
    report.pseudo_gt = walk.x0_tilde;
    report.t = t;
    report.s = t - delta_T;
    report.oracle_calls = walk.calls;
    report.loss_proxy = w * residual.squaredNorm();
    return report;
}

double
EtaAnalysis::series_disagreement() const {
    return (eta_residual - eta_series).norm();
}

double
EtaAnalysis::decomposition_residual(const NoiseSchedule& schedule) const {
    return (x0_minus_pseudo_gt - (schedule.gamma(t) * interval_score + eta_series)).norm();
}

EtaAnalysis
analyze_eta(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& x0, int t,
            int delta_T, const GuidanceSpec& guidance) {
    const MirroredWalk walk = mirrored_walk(oracle, schedule, x0, t, delta_T, guidance);
    const auto& grid = walk.inversion.timesteps;
    const std::size_t n = grid.size() - 1;

    // diff[i] (1-based) = eps_guided at the denoised latent of grid point i
    // minus eps_null at the inverted latent of grid point i - 1.
    std::vector<Vec> diff(n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
        diff[i] = walk.visits[n - i].eps - walk.inversion.eps_cache[i - 1];
    }

    EtaAnalysis out;
    out.t = t;
    out.s = t - delta_T;
    out.x0_minus_pseudo_gt = x0 - walk.x0_tilde;
    out.interval_score = diff[n];
    out.eta_residual = out.x0_minus_pseudo_gt - schedule.gamma(t) * out.interval_score;
    out.eta_series = Vec::Zero(x0.size());
    for (std::size_t i = 1; i < n; ++i) {
        out.eta_series += schedule.gamma(grid[i]) * (diff[i] - diff[i + 1]);
    }
    out.oracle_calls = walk.calls;
    return out;
}

Vec
eta_bias(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& x0, int t,
         int delta_T, const GuidanceSpec& guidance) {
    const EtaAnalysis analysis = analyze_eta(oracle, schedule, x0, t, delta_T, guidance);
    const double scale = std::max(1.0, analysis.eta_residual.norm());
    if (analysis.series_disagreement() > 1e-9 * scale) {
        throw NumericError("bias series and residual disagree by " +
                           std::to_string(analysis.series_disagreement()));
    }
    return analysis.eta_residual;
}

double
decomposition_check(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& x0,
                    int t, int delta_T, const GuidanceSpec& guidance) {
    return analyze_eta(oracle, schedule, x0, t, delta_T, guidance)
        .decomposition_residual(schedule);
}

void
write_gradient_csv_header(std::ostream& out) {
    out << "t,s,grad_norm,oracle_calls,objective\n";
}

void
write_gradient_csv_row(std::ostream& out, const GradientReport& report) {
    const auto precision = out.precision(17);
    out << report.t << ',';
    if (report.s) out << *report.s;
    out << ',' << report.grad_x0.norm() << ',' << report.oracle_calls << ','
        << to_string(report.objective) << '\n';
    out.precision(precision);
}

} // namespace ismlab
