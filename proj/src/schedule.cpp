// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/schedule.hpp"

#include "ismlab/errors.hpp"

#include <cmath>
#include <string>

namespace ismlab {

std::string_view
to_string(OmegaKind kind) {
    switch (kind) {
    case OmegaKind::Unit: return "unit";
    case OmegaKind::OneMinusAlphaBar: return "one_minus_alpha_bar";
    }
    return "unit";
}

OmegaKind
omega_kind_from_string(std::string_view name) {
    if (name == "unit") return OmegaKind::Unit;
    if (name == "one_minus_alpha_bar") return OmegaKind::OneMinusAlphaBar;
    throw ConfigError("unknown omega kind '" + std::string(name) + "'");
}

NoiseSchedule
NoiseSchedule::linear(int steps, double beta_start, double beta_end, OmegaKind omega) {
    if (steps < 2) throw ConfigError("schedule needs T >= 2");
    if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
        throw ConfigError("schedule needs 0 < beta_start <= beta_end < 1");
    }

    NoiseSchedule s;
    s.steps_ = steps;
    s.omega_kind_ = omega;
    s.betas_.assign(steps + 1, 0.0);
    s.alpha_bars_.assign(steps + 1, 1.0);
    for (int t = 1; t <= steps; ++t) {
        const double frac = static_cast<double>(t - 1) / static_cast<double>(steps - 1);
        s.betas_[t] = beta_start + (beta_end - beta_start) * frac;
        s.alpha_bars_[t] = s.alpha_bars_[t - 1] * (1.0 - s.betas_[t]);
    }
    s.sqrt_alpha_bars_.resize(steps + 1);
    s.sqrt_one_minus_.resize(steps + 1);
    for (int t = 0; t <= steps; ++t) {
        s.sqrt_alpha_bars_[t] = std::sqrt(s.alpha_bars_[t]);
        s.sqrt_one_minus_[t] = std::sqrt(1.0 - s.alpha_bars_[t]);
    }
    return s;
}

NoiseSchedule
make_schedule(int steps, double beta_start, double beta_end, OmegaKind omega) {
    return NoiseSchedule::linear(steps, beta_start, beta_end, omega);
}

void
NoiseSchedule::check_timestep(int t) const {
    if (t < 0 || t > steps_) {
        throw IndexError("timestep " + std::to_string(t) + " outside [0, " +
                         std::to_string(steps_) + "]");
    }
}

double
NoiseSchedule::beta(int t) const {
    check_timestep(t);
    return betas_[t];
}

double
NoiseSchedule::alpha_bar(int t) const {
    check_timestep(t);
    return alpha_bars_[t];
}

double
NoiseSchedule::sqrt_alpha_bar(int t) const {
    check_timestep(t);
    return sqrt_alpha_bars_[t];
}

double
NoiseSchedule::sqrt_one_minus_alpha_bar(int t) const {
    check_timestep(t);
    return sqrt_one_minus_[t];
}

double
NoiseSchedule::gamma(int t) const {
    check_timestep(t);
    return sqrt_one_minus_[t] / sqrt_alpha_bars_[t];
}

double
NoiseSchedule::omega(int t) const {
    if (t < 1 || t > steps_) {
        throw IndexError("omega(t) needs 1 <= t <= T, got " + std::to_string(t));
    }
    return omega_kind_ == OmegaKind::Unit ? 1.0 : 1.0 - alpha_bars_[t];
}

} // namespace ismlab
