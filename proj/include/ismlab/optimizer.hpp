// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

namespace ismlab {

struct AdamConfig {
    double step_size = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps_hat = 1e-8;

    void validate() const;
};

/// First/second moment accumulators with bias correction.
class AdamOptimizer {
public:
    AdamOptimizer(AdamConfig config, Eigen::Index size);

    /// In-place descent step on `params` along `grad`.
    void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

    long steps_taken() const { return steps_; }
    const AdamConfig& config() const { return config_; }

private:
    AdamConfig config_;
    Eigen::VectorXd first_;
    Eigen::VectorXd second_;
    long steps_ = 0;
};

} // namespace ismlab
