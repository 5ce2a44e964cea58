// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ismlab/generators.hpp"
#include "ismlab/objectives.hpp"
#include "ismlab/optimizer.hpp"
#include "ismlab/oracle.hpp"
#include "ismlab/rng.hpp"
#include "ismlab/schedule.hpp"

#include <chrono>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ismlab {

struct DistillConfig {
    Objective objective = Objective::Ism;
    int iterations = 2000;
    int t_min = 220;
    int t_max = 980;
    int delta_T_start = 200;
    int delta_T_end = 50;
    int delta_S = 50;
    GuidanceSpec guidance;
    int view_batch = 1;
    AdamConfig optimizer;
    std::uint64_t seed = 0;
    ViewJitterSpec jitter;
    /// 0 disables frame snapshots.
    int snapshot_every = 0;
    /// Label for nearest_mode_distance; empty means guidance.positive.
    Label metric_label;

    void validate(const NoiseSchedule& schedule, const MixtureOracle& oracle) const;
    const Label& effective_metric_label() const;
    /// Linear interpolation delta_T_start -> delta_T_end over the run.
    int delta_T_at(int iter) const;
};

struct RunRow {
    int iter = 0;
    int t = 0;
    int delta_T = 0;
    double grad_norm = 0.0;
    std::uint64_t oracle_calls = 0;
    double loss_proxy = 0.0;
    double nearest_mode_distance = 0.0;
    double wall_time = 0.0;
};

struct Frame {
    int iter = 0;
    Vec image;
};

struct RunLog {
    std::vector<RunRow> rows;
    /// nearest_mode_distance before the first update.
    double initial_distance = 0.0;
    Vec final_theta;
    Vec final_render;
    std::vector<Frame> frames;
    bool aborted = false;
    std::string abort_reason;

    std::uint64_t total_oracle_calls() const;
    double final_distance() const;
};

/// min_k |x - mu_k| over the label's component means.
double nearest_mode_distance(const MixtureOracle& oracle, const Label& label, const Vec& x);

/// Test hooks. `objective_override`, when set, replaces the score objective:
/// it receives the rendered x0 and returns d loss / d x0.
struct DistillHooks {
    std::function<Vec(const Vec& x0)> objective_override;
};

/// Mutable state of one run: generator, optimizer moments and the three
/// seed-derived random substreams (timesteps, views, SDS noise).
struct DistillState {
    DistillState(std::unique_ptr<Generator> generator, const DistillConfig& config);

    std::unique_ptr<Generator> generator;
    AdamOptimizer optimizer;
    Rng t_stream;
    Rng view_stream;
    Rng noise_stream;
    std::chrono::steady_clock::time_point started;
};

struct DistillContext {
    const MixtureOracle& oracle;
    const NoiseSchedule& schedule;
    const DistillConfig& config;
    DistillHooks hooks;
};

/// One iteration: sample t and views, render, evaluate the objective per
/// view, pull back, accumulate, one optimizer update. Throws NumericError on
/// a non-finite gradient.
RunRow distill_step(DistillState& state, const DistillContext& context, int iter);

RunLog run_distillation(const Generator& generator, const MixtureOracle& oracle,
                        const NoiseSchedule& schedule, const DistillConfig& config,
                        const DistillHooks& hooks = {});

/// metrics.csv: header + one row per iteration.
void write_metrics_csv(std::ostream& out, const RunLog& log);

} // namespace ismlab
