// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/distill.hpp"

#include "ismlab/errors.hpp"

#include <cmath>
#include <limits>
#include <ostream>

namespace ismlab {

void
DistillConfig::validate(const NoiseSchedule& schedule, const MixtureOracle& oracle) const {
    if (iterations < 0) throw ConfigError("iterations must be >= 0");
    if (t_min < 1 || t_min > t_max || t_max > schedule.steps()) {
        throw ConfigError("t range must satisfy 1 <= t_min <= t_max <= T");
    }
    if (delta_T_end < 1 || delta_T_end > delta_T_start || delta_T_start >= t_min) {
        throw ConfigError("delta_T must satisfy 1 <= delta_T_end <= delta_T_start < t_min");
    }
    if (delta_S < 1) throw ConfigError("delta_S must be >= 1");
    if (view_batch < 1) throw ConfigError("view_batch must be >= 1");
    if (snapshot_every < 0) throw ConfigError("snapshot_every must be >= 0");
    optimizer.validate();
    jitter.validate();
    oracle.validate(guidance);
    if (!oracle.has_label(effective_metric_label())) {
        throw LabelError("unknown metric label '" + effective_metric_label() + "'");
    }
}

const Label&
DistillConfig::effective_metric_label() const {
    return metric_label.empty() ? guidance.positive : metric_label;
}

int
DistillConfig::delta_T_at(int iter) const {
    if (iterations <= 1) return delta_T_start;
    const double frac = static_cast<double>(iter) / (iterations - 1);
    return static_cast<int>(std::lround(delta_T_start + (delta_T_end - delta_T_start) * frac));
}

std::uint64_t
RunLog::total_oracle_calls() const {
    std::uint64_t total = 0;
    for (const auto& row : rows) total += row.oracle_calls;
    return total;
}

double
RunLog::final_distance() const {
    return rows.empty() ? initial_distance : rows.back().nearest_mode_distance;
}

double
nearest_mode_distance(const MixtureOracle& oracle, const Label& label, const Vec& x) {
    if (x.size() != oracle.dim()) throw DimensionError("point dimension differs from the oracle");
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k : oracle.label_components(label)) {
        best = std::min(best, (x - oracle.components()[k].mean).norm());
    }
    return best;
}

DistillState::DistillState(std::unique_ptr<Generator> gen, const DistillConfig& config)
    : generator(std::move(gen)),
      optimizer(config.optimizer, generator->parameters().size()),
      t_stream(config.seed, 1),
      view_stream(config.seed, 2),
      noise_stream(config.seed, 3),
      started(std::chrono::steady_clock::now()) {}

RunRow
distill_step(DistillState& state, const DistillContext& context, int iter) {
    const DistillConfig& cfg = context.config;
    const NoiseSchedule& schedule = context.schedule;
    Generator& gen = *state.generator;

    RunRow row;
    row.iter = iter;
    row.t = state.t_stream.uniform_int(cfg.t_min, cfg.t_max);
    row.delta_T = cfg.delta_T_at(iter);
    const View base = gen.canonical_view();

    Vec theta_grad = Vec::Zero(gen.parameters().size());
    for (int b = 0; b < cfg.view_batch; ++b) {
        const View view = sample_view(state.view_stream.next_u64(), cfg.jitter, base.width,
                                      base.height);
        const Vec x0 = gen.render(view);
        Vec direction;
        if (context.hooks.objective_override) {
            direction = context.hooks.objective_override(x0);
            row.loss_proxy += 0.5 * direction.squaredNorm();
        } else {
            GradientReport report;
            switch (cfg.objective) {
            case Objective::Sds:
                report = sds_gradient(context.oracle, schedule, x0, row.t,
                                      state.noise_stream.normal_vector(x0.size()), cfg.guidance);
                break;
            case Objective::Ism: {
                const int delta_S = std::min(cfg.delta_S, row.t - row.delta_T);
                report = ism_gradient(context.oracle, schedule, x0, row.t, row.delta_T, delta_S,
                                      cfg.guidance);
                break;
            }
            case Objective::Naive:
                report = naive_gradient(context.oracle, schedule, x0, row.t, row.delta_T,
                                        cfg.guidance);
                break;
            }
            direction = std::move(report.grad_x0);
            row.oracle_calls += report.oracle_calls;
            row.loss_proxy += report.loss_proxy;
        }
        theta_grad += gen.pullback(view, direction);
    }

    row.grad_norm = theta_grad.norm();
    if (!theta_grad.allFinite()) {
        throw NumericError("non-finite gradient at iteration " + std::to_string(iter));
    }

    Vec theta = gen.parameters();
    state.optimizer.step(theta, theta_grad);
    gen.set_parameters(theta);
    gen.project();

    row.nearest_mode_distance = nearest_mode_distance(context.oracle, cfg.effective_metric_label(),
                                                      gen.render(base));
    row.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - state.started).count();
    return row;
}

RunLog
run_distillation(const Generator& generator, const MixtureOracle& oracle,
                 const NoiseSchedule& schedule, const DistillConfig& config,
                 const DistillHooks& hooks) {
    config.validate(schedule, oracle);
    if (generator.image_dim() != oracle.dim()) {
        throw DimensionError("generator output dimension differs from the oracle");
    }

    DistillState state(generator.clone(), config);
    const DistillContext context{oracle, schedule, config, hooks};
    const Label& label = config.effective_metric_label();
    const View base = generator.canonical_view();
    const bool snapshots = config.snapshot_every > 0 && generator.image_shape().has_value();

    RunLog log;
    log.rows.reserve(config.iterations);
    log.initial_distance = nearest_mode_distance(oracle, label, generator.render(base));
    if (snapshots) log.frames.push_back({0, generator.render(base)});

    for (int iter = 0; iter < config.iterations; ++iter) {
        try {
            log.rows.push_back(distill_step(state, context, iter));
        } catch (const NumericError& err) {
            RunRow diag;
            diag.iter = iter;
            diag.grad_norm = std::numeric_limits<double>::quiet_NaN();
            diag.nearest_mode_distance = std::numeric_limits<double>::quiet_NaN();
            diag.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                           state.started)
                                 .count();
            log.rows.push_back(diag);
            log.aborted = true;
            log.abort_reason = err.what();
            break;
        }
        const int done = iter + 1;
        if (snapshots && (done % config.snapshot_every == 0 || done == config.iterations)) {
            log.frames.push_back({done, state.generator->render(base)});
        }
    }

    log.final_theta = state.generator->parameters();
    log.final_render = state.generator->render(base);
    return log;
}

void
write_metrics_csv(std::ostream& out, const RunLog& log) {
    out << "iter,t,delta_T,grad_norm,oracle_calls,loss_proxy,nearest_mode_distance,wall_time\n";
    const auto precision = out.precision(17);
    for (const auto& r : log.rows) {
        out << r.iter << ',' << r.t << ',' << r.delta_T << ',' << r.grad_norm << ','
            << r.oracle_calls << ',' << r.loss_proxy << ',' << r.nearest_mode_distance << ','
            << r.wall_time << '\n';
    }
    out.precision(precision);
}

} // namespace ismlab
