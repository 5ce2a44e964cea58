// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ismlab/oracle.hpp"
#include "ismlab/schedule.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string_view>

namespace ismlab {

enum class Objective { Ism, Sds, Naive };

std::string_view to_string(Objective objective);
Objective objective_from_string(std::string_view name);

/// A distillation update direction with respect to the rendered view x0.
struct GradientReport {
    Objective objective = Objective::Sds;
    Vec grad_x0;
    /// Pseudo ground truth the direction pulls toward. For ISM this is the
    /// implied target x0 - gamma(t) * interval_score.
    Vec pseudo_gt;
    int t = 0;
    std::optional<int> s; ///< t - delta_T for interval objectives
    std::uint64_t oracle_calls = 0;
    /// omega-weighted squared residual of the objective.
    double loss_proxy = 0.0;
};

/// SDS: omega(t) * (eps_guided(x_t, t) - eps), x_t = add_noise(x0, t, eps).
GradientReport sds_gradient(const MixtureOracle& oracle, const NoiseSchedule& schedule,
                            const Vec& x0, int t, const Vec& eps,
                            const GuidanceSpec& guidance);

/// ISM: omega(t) * (eps_guided(x_t, t) - eps_null(x_s, s)) with x_s, x_t from
/// DDIM inversion at stride delta_S up to s = t - delta_T and one extra hop
/// s -> t. The unconditional term is read from the inversion cache.
GradientReport ism_gradient(const MixtureOracle& oracle, const NoiseSchedule& schedule,
                            const Vec& x0, int t, int delta_T, int delta_S,
                            const GuidanceSpec& guidance);

/// Naive multi-step objective: omega/gamma * (x0 - x~0) with x~0 from guided
/// denoising of the DDIM-inverted x_t, both at stride delta_T.
GradientReport naive_gradient(const MixtureOracle& oracle, const NoiseSchedule& schedule,
                              const Vec& x0, int t, int delta_T, const GuidanceSpec& guidance);

/// Both evaluations of the bias term separating the naive objective from the
/// interval score.
struct EtaAnalysis {
    int t = 0;
    int s = 0;
    Vec x0_minus_pseudo_gt; ///< x0 - x~0
    Vec interval_score;     ///< eps_guided(x_t, t) - eps_null(x_s, s)
    Vec eta_residual;       ///< (x0 - x~0) - gamma(t) * interval_score
    Vec eta_series;         ///< explicit telescoped series
    std::uint64_t oracle_calls = 0;

    double series_disagreement() const;
    /// |(x0 - x~0) - (gamma(t) * interval_score + eta_series)|
    double decomposition_residual(const NoiseSchedule& schedule) const;
};

EtaAnalysis analyze_eta(const MixtureOracle& oracle, const NoiseSchedule& schedule,
                        const Vec& x0, int t, int delta_T, const GuidanceSpec& guidance);

/// Residual form of eta; throws NumericError if the series disagrees by more
/// than 1e-9 (relative to max(1, |eta|)).
Vec eta_bias(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& x0, int t,
             int delta_T, const GuidanceSpec& guidance);

double decomposition_check(const MixtureOracle& oracle, const NoiseSchedule& schedule,
                           const Vec& x0, int t, int delta_T, const GuidanceSpec& guidance);

/// CSV row: t, s, grad_norm, oracle_calls, objective.
void write_gradient_csv_header(std::ostream& out);
void write_gradient_csv_row(std::ostream& out, const GradientReport& report);

} // namespace ismlab
