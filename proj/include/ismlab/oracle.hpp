// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ismlab/schedule.hpp"

#include <Eigen/Core>

#include <atomic>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ismlab {

using Vec = Eigen::VectorXd;
using Label = std::string;

/// Reserved label selecting every mixture component (the unconditional
/// branch).
inline const Label kNullLabel = "null";

struct MixtureComponent {
    double weight = 1.0;
    Vec mean;
    double sigma = 1.0;
};

/// Classifier-free guidance: eps(neg) + scale * (eps(pos) - eps(neg)).
struct GuidanceSpec {
    Label positive = kNullLabel;
    Label negative = kNullLabel;
    double scale = 7.5;
};

/// Closed-form epsilon-predictor for an isotropic Gaussian-mixture data prior.
///
/// Under forward noising x_t = sqrt(ab) x_0 + sqrt(1 - ab) eps, each component
/// k becomes N(sqrt(ab) mu_k, (ab sigma_k^2 + 1 - ab) I), so the noised score
/// is available analytically. A label restricts the mixture to a subset of
/// components with renormalized weights.
///
/// All evaluation methods are const and thread-safe. The oracle keeps a
/// relaxed atomic count of epsilon-prediction requests for call accounting.
class MixtureOracle {
public:
    static constexpr double kSigmaMin = 1e-4;

    /// Weights must be positive; they are renormalized to sum to 1. Sigmas
    /// below kSigmaMin are clamped. The NULL label is added automatically
    /// and must not appear in `labels`.
    MixtureOracle(std::vector<MixtureComponent> components,
                  std::map<Label, std::vector<std::size_t>> labels = {});

    MixtureOracle(const MixtureOracle& other);
    MixtureOracle& operator=(const MixtureOracle& other);

    int dim() const { return dim_; }
    const std::vector<MixtureComponent>& components() const { return components_; }
    const std::map<Label, std::vector<std::size_t>>& labels() const { return labels_; }
    bool has_label(const Label& label) const { return labels_.contains(label); }

    /// Component indices of `label`; throws LabelError for unknown labels.
    const std::vector<std::size_t>& label_components(const Label& label) const;

    /// -sqrt(1 - ab_t) * grad_x log p_t(x | label). Zero at t = 0.
    Vec eps_predict(const NoiseSchedule& schedule, const Vec& x, int t,
                    const Label& label) const;

    /// Log of the noised, label-restricted mixture density (log-sum-exp).
    double log_density(const NoiseSchedule& schedule, const Vec& x, int t,
                       const Label& label) const;

    Vec eps_guided(const NoiseSchedule& schedule, const Vec& x, int t,
                   const GuidanceSpec& guidance) const;

    void validate(const GuidanceSpec& guidance) const;

    std::uint64_t request_count() const { return requests_.load(std::memory_order_relaxed); }
    void reset_request_count() { requests_.store(0, std::memory_order_relaxed); }

private:
    void check_inputs(const NoiseSchedule& schedule, const Vec& x, int t) const;
    Vec eps_unchecked(const NoiseSchedule& schedule, const Vec& x, int t,
                      const std::vector<std::size_t>& members) const;

    int dim_ = 0;
    std::vector<MixtureComponent> components_;
    std::map<Label, std::vector<std::size_t>> labels_;
    mutable std::atomic<std::uint64_t> requests_{0};
};

} // namespace ismlab
