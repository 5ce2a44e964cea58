// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/optimizer.hpp"

#include "ismlab/errors.hpp"

#include <cmath>

namespace ismlab {

void
AdamConfig::validate() const {
    if (!(step_size > 0.0) || !std::isfinite(step_size)) {
        throw ConfigError("optimizer step_size must be positive");
    }
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        throw ConfigError("optimizer betas must lie in [0, 1)");
    }
    if (!(eps_hat > 0.0)) throw ConfigError("optimizer eps_hat must be positive");
}

AdamOptimizer::AdamOptimizer(AdamConfig config, Eigen::Index size)
    : config_(config), first_(Eigen::VectorXd::Zero(size)), second_(Eigen::VectorXd::Zero(size)) {
    config_.validate();
}

void
AdamOptimizer::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
    if (params.size() != first_.size() || grad.size() != first_.size()) {
        throw DimensionError("optimizer state size mismatch");
    }
    ++steps_;
    first_ = config_.beta1 * first_ + (1.0 - config_.beta1) * grad;
    second_ = config_.beta2 * second_ + (1.0 - config_.beta2) * grad.cwiseAbs2();
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    params.array() -= config_.step_size * (first_.array() / c1) /
                      ((second_.array() / c2).sqrt() + config_.eps_hat);
}

} // namespace ismlab
