// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ismlab {

enum class OmegaKind { Unit, OneMinusAlphaBar };

std::string_view to_string(OmegaKind kind);
OmegaKind omega_kind_from_string(std::string_view name);

/// Discrete diffusion time axis with T steps. Index 0 is the clean-data
/// boundary: beta(0) = 0 and alpha_bar(0) = 1.
///
/// Immutable after construction.
class NoiseSchedule {
public:
    /// Linear beta ramp from beta_start (t = 1) to beta_end (t = T).
    static NoiseSchedule linear(int steps, double beta_start, double beta_end,
                                OmegaKind omega = OmegaKind::Unit);

    int steps() const { return steps_; }
    OmegaKind omega_kind() const { return omega_kind_; }
    double beta_start() const { return betas_.size() > 1 ? betas_[1] : 0.0; }
    double beta_end() const { return betas_.back(); }

    double beta(int t) const;
    double alpha_bar(int t) const;
    double sqrt_alpha_bar(int t) const;
    double sqrt_one_minus_alpha_bar(int t) const;

    /// sqrt(1 - alpha_bar) / sqrt(alpha_bar); 0 at t = 0.
    double gamma(int t) const;

    /// Loss weight; valid for 1 <= t <= T.
    double omega(int t) const;

    std::span<const double> betas() const { return betas_; }
    std::span<const double> alpha_bars() const { return alpha_bars_; }

    /// Throws IndexError unless 0 <= t <= T.
    void check_timestep(int t) const;

private:
    NoiseSchedule() = default;

    int steps_ = 0;
    OmegaKind omega_kind_ = OmegaKind::Unit;
    std::vector<double> betas_;
    std::vector<double> alpha_bars_;
    std::vector<double> sqrt_alpha_bars_;
    std::vector<double> sqrt_one_minus_;
};

NoiseSchedule make_schedule(int steps, double beta_start, double beta_end,
                            OmegaKind omega = OmegaKind::Unit);

} // namespace ismlab
