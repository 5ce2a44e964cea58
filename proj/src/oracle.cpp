// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/oracle.hpp"

#include "ismlab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace ismlab {

MixtureOracle::MixtureOracle(std::vector<MixtureComponent> components,
                             std::map<Label, std::vector<std::size_t>> labels)
    : components_(std::move(components)), labels_(std::move(labels)) {
    if (components_.empty()) throw ConfigError("mixture needs at least one component");
    dim_ = static_cast<int>(components_.front().mean.size());
    if (dim_ < 1) throw ConfigError("mixture dimension must be >= 1");

    double total = 0.0;
    for (const auto& c : components_) {
        if (c.mean.size() != dim_) throw DimensionError("component means differ in dimension");
        if (!c.mean.allFinite()) throw ConfigError("component mean must be finite");
        if (!(c.weight > 0.0) || !std::isfinite(c.weight)) {
            throw ConfigError("component weights must be positive and finite");
        }
        if (!(c.sigma >= 0.0) || !std::isfinite(c.sigma)) {
            throw ConfigError("component sigma must be finite and non-negative");
        }
        total += c.weight;
    }
    for (auto& c : components_) {
        c.weight /= total;
        c.sigma = std::max(c.sigma, kSigmaMin);
    }

    if (labels_.contains(kNullLabel)) {
        throw ConfigError("label '" + kNullLabel + "' is reserved");
    }
    for (auto& [name, members] : labels_) {
        if (members.empty()) throw ConfigError("label '" + name + "' has no components");
        std::sort(members.begin(), members.end());
        members.erase(std::unique(members.begin(), members.end()), members.end());
        if (members.back() >= components_.size()) {
            throw ConfigError("label '" + name + "' references a missing component");
        }
    }
    std::vector<std::size_t> all(components_.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    labels_.emplace(kNullLabel, std::move(all));
}

MixtureOracle::MixtureOracle(const MixtureOracle& other)
    : dim_(other.dim_), components_(other.components_), labels_(other.labels_),
      requests_(other.request_count()) {}

MixtureOracle&
MixtureOracle::operator=(const MixtureOracle& other) {
    if (this != &other) {
        dim_ = other.dim_;
        components_ = other.components_;
        labels_ = other.labels_;
        requests_.store(other.request_count(), std::memory_order_relaxed);
    }
    return *this;
}

const std::vector<std::size_t>&
MixtureOracle::label_components(const Label& label) const {
    const auto it = labels_.find(label);
    if (it == labels_.end()) throw LabelError("unknown label '" + label + "'");
    return it->second;
}

void
MixtureOracle::validate(const GuidanceSpec& guidance) const {
    label_components(guidance.positive);
    label_components(guidance.negative);
    if (!std::isfinite(guidance.scale)) throw ConfigError("guidance scale must be finite");
}

void
MixtureOracle::check_inputs(const NoiseSchedule& schedule, const Vec& x, int t) const {
    schedule.check_timestep(t);
    if (x.size() != dim_) {
        throw DimensionError("input has dimension " + std::to_string(x.size()) +
                             ", oracle expects " + std::to_string(dim_));
    }
    if (!x.allFinite()) throw InputError("input contains non-finite values");
}

namespace {

struct NoisedComponent {
    double log_weight; // log w + normalizer + exponent
    double variance;
};

} // namespace

Vec
MixtureOracle::eps_unchecked(const NoiseSchedule& schedule, const Vec& x, int t,
                             const std::vector<std::size_t>& members) const {
    if (t == 0) return Vec::Zero(dim_);

    const double ab = schedule.alpha_bar(t);
    const double sqrt_ab = schedule.sqrt_alpha_bar(t);
    const double sqrt_1m = schedule.sqrt_one_minus_alpha_bar(t);

    double weight_sum = 0.0;
    for (const auto k : members) weight_sum += components_[k].weight;

    std::vector<double> log_r(members.size());
    std::vector<double> var(members.size());
    double max_log = -INFINITY;
    for (std::size_t j = 0; j < members.size(); ++j) {
        const auto& c = components_[members[j]];
        var[j] = ab * c.sigma * c.sigma + (1.0 - ab);
        const double dist2 = (x - sqrt_ab * c.mean).squaredNorm();
        log_r[j] = std::log(c.weight / weight_sum) - 0.5 * dim_ * std::log(var[j]) -
                   0.5 * dist2 / var[j];
        max_log = std::max(max_log, log_r[j]);
    }
    double norm = 0.0;
    for (auto& l : log_r) {
        l = std::exp(l - max_log);
        norm += l;
    }

    Vec eps = Vec::Zero(dim_);
    for (std::size_t j = 0; j < members.size(); ++j) {
        const auto& c = components_[members[j]];
        eps += (log_r[j] / norm / var[j]) * (x - sqrt_ab * c.mean);
    }
    return sqrt_1m * eps;
}

Vec
MixtureOracle::eps_predict(const NoiseSchedule& schedule, const Vec& x, int t,
                           const Label& label) const {
    const auto& members = label_components(label);
    check_inputs(schedule, x, t);
    requests_.fetch_add(1, std::memory_order_relaxed);
    return eps_unchecked(schedule, x, t, members);
}

double
MixtureOracle::log_density(const NoiseSchedule& schedule, const Vec& x, int t,
                           const Label& label) const {
    const auto& members = label_components(label);
    check_inputs(schedule, x, t);

    const double ab = schedule.alpha_bar(t);
    const double sqrt_ab = schedule.sqrt_alpha_bar(t);
    double weight_sum = 0.0;
    for (const auto k : members) weight_sum += components_[k].weight;

    std::vector<double> terms;
    terms.reserve(members.size());
    double max_term = -INFINITY;
    for (const auto k : members) {
        const auto& c = components_[k];
        const double var = ab * c.sigma * c.sigma + (1.0 - ab);
        const double dist2 = (x - sqrt_ab * c.mean).squaredNorm();
        const double term = std::log(c.weight / weight_sum) -
                            0.5 * dim_ * std::log(2.0 * std::numbers::pi * var) -
                            0.5 * dist2 / var;
        terms.push_back(term);
        max_term = std::max(max_term, term);
    }
    double acc = 0.0;
    for (const double term : terms) acc += std::exp(term - max_term);
    return max_term + std::log(acc);
}

Vec
MixtureOracle::eps_guided(const NoiseSchedule& schedule, const Vec& x, int t,
                          const GuidanceSpec& guidance) const {
    validate(guidance);
    check_inputs(schedule, x, t);
    requests_.fetch_add(1, std::memory_order_relaxed);

    const auto& negative = label_components(guidance.negative);
    if (guidance.scale == 0.0 || guidance.positive == guidance.negative) {
        return eps_unchecked(schedule, x, t, negative);
    }
    const auto& positive = label_components(guidance.positive);
    if (guidance.scale == 1.0) return eps_unchecked(schedule, x, t, positive);

    Vec eps_neg = eps_unchecked(schedule, x, t, negative);
    Vec eps_pos = eps_unchecked(schedule, x, t, positive);
    return eps_neg + guidance.scale * (eps_pos - eps_neg);
}

} // namespace ismlab
