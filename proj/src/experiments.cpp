// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/experiments.hpp"

#include "ismlab/errors.hpp"
#include "ismlab/io.hpp"
#include "ismlab/parallel.hpp"
#include "ismlab/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace ismlab {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::ofstream
open_csv(const fs::path& path) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path.string());
    out.precision(17);
    return out;
}

void
write_report(const fs::path& out, const json& report) {
    write_text_file(out / "report.json", report.dump(2) + "\n");
}

json
optional_json(const std::optional<int>& v) {
    return v ? json(*v) : json(nullptr);
}

void
require_timestep_grid(const std::vector<int>& ts, const NoiseSchedule& schedule) {
    for (int t : ts) {
        if (t < 1 || t > schedule.steps()) {
            throw ConfigError("grid timestep " + std::to_string(t) + " outside the schedule");
        }
    }
}

Vec
mean_of(const std::vector<Vec>& samples) {
    Vec mean = Vec::Zero(samples.front().size());
    for (const auto& s : samples) mean += s;
    return mean / static_cast<double>(samples.size());
}

std::string
frame_name(const char* prefix, int value) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s%06d.ppm", prefix, value);
    return buf;
}

void
write_frames(const fs::path& dir, const Generator& gen, const RunLog& log) {
    const auto shape = gen.image_shape();
    if (!shape) return;
    for (const auto& frame : log.frames) {
        write_ppm(dir / frame_name("iter_", frame.iter), frame.image, (*shape)[0], (*shape)[1],
                  (*shape)[2]);
    }
}

double
median_crossing(std::vector<std::optional<int>> crossings) {
    std::vector<double> v;
    for (const auto& c : crossings) {
        v.push_back(c ? static_cast<double>(*c) : std::numeric_limits<double>::infinity());
    }
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    const double lo = v[n / 2 - 1], hi = v[n / 2];
    if (std::isinf(hi)) return hi;
    return 0.5 * (lo + hi);
}

json
number_or_null(double v) {
    return std::isfinite(v) ? json(v) : json(nullptr);
}

} // namespace

Vec
multi_step_pseudo_gt(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Vec& x0,
                     int t, int stride, const GuidanceSpec& guidance) {
    const auto grid = stride_grid(t, std::min(stride, t));
    const LatentTrajectory traj = ddim_invert_along(oracle, schedule, x0, grid, kNullLabel);
    const std::vector<int> reversed(grid.rbegin(), grid.rend());
    return ddim_denoise_along(oracle, schedule, traj.final_latent(), reversed, guidance);
}

Vec
sample_mixture(const MixtureOracle& oracle, const Label& label, Rng& rng) {
    const auto& members = oracle.label_components(label);
    double total = 0.0;
    for (std::size_t k : members) total += oracle.components()[k].weight;
    double u = rng.uniform() * total;
    std::size_t pick = members.back();
    for (std::size_t k : members) {
        u -= oracle.components()[k].weight;
        if (u < 0.0) {
            pick = k;
            break;
        }
    }
    const auto& comp = oracle.components()[pick];
    return comp.mean + comp.sigma * rng.normal_vector(oracle.dim());
}

double
total_variance(const std::vector<Vec>& samples) {
    if (samples.size() < 2) return 0.0;
    // Shift by the first sample so identical samples give exactly zero.
    const Vec& origin = samples.front();
    Vec mean = Vec::Zero(origin.size());
    for (const auto& s : samples) mean += s - origin;
    mean /= static_cast<double>(samples.size());
    double sum = 0.0;
    for (const auto& s : samples) sum += ((s - origin) - mean).squaredNorm();
    return sum / static_cast<double>(samples.size() - 1);
}

ConsistencyReport
run_consistency(const ExperimentConfig& config, const fs::path& out) {
    const NoiseSchedule schedule = config.schedule.build();
    const MixtureOracle oracle = config.oracle.build();
    const GridConfig& grids = config.grids;
    const GuidanceSpec& guidance = config.distill.guidance;
    const Label& label = config.distill.effective_metric_label();
    if (grids.noise_draws < 2) throw ConfigError("consistency needs at least 2 noise draws");
    require_timestep_grid(grids.t_values, schedule);
    oracle.validate(guidance);

    const auto gen = config.generator.build(oracle.dim());
    const Vec x0 = gen->render(gen->canonical_view());
    if (x0.size() != oracle.dim()) throw DimensionError("generator output differs from oracle");
    const int k_draws = grids.noise_draws;

    ConsistencyReport report;
    std::vector<std::vector<Vec>> sds_all, ism_all;
    std::vector<Vec> sds_means, ism_means;
    std::vector<Vec> sds_flat, ism_flat;
    for (int t : grids.t_values) {
        Rng rng(config.seed, static_cast<std::uint64_t>(t));
        std::vector<Vec> sds, ism;
        for (int k = 0; k < k_draws; ++k) {
            const Vec eps = rng.normal_vector(oracle.dim());
            sds.push_back(sds_gradient(oracle, schedule, x0, t, eps, guidance).pseudo_gt);
            ism.push_back(
                multi_step_pseudo_gt(oracle, schedule, x0, t, grids.denoise_stride, guidance));
        }
        ConsistencyRow row;
        row.t = t;
        row.sds_variance = total_variance(sds);
        row.ism_variance = total_variance(ism);
        for (const auto& p : sds) row.sds_mean_distance += nearest_mode_distance(oracle, label, p);
        row.sds_mean_distance /= k_draws;
        row.ism_distance = nearest_mode_distance(oracle, label, ism.front());
        report.rows.push_back(row);

        sds_means.push_back(mean_of(sds));
        ism_means.push_back(mean_of(ism));
        sds_flat.insert(sds_flat.end(), sds.begin(), sds.end());
        ism_flat.insert(ism_flat.end(), ism.begin(), ism.end());
        sds_all.push_back(std::move(sds));
        ism_all.push_back(std::move(ism));
    }
    report.sds_across_t_variance = total_variance(sds_means);
    report.ism_across_t_variance = total_variance(ism_means);
    auto mean_distance = [&](const std::vector<Vec>& v) {
        double sum = 0.0;
        for (const auto& p : v) sum += nearest_mode_distance(oracle, label, p);
        return sum / static_cast<double>(v.size());
    };
    report.sds_averaged_distance = nearest_mode_distance(oracle, label, mean_of(sds_flat));
    report.sds_mean_of_distances = mean_distance(sds_flat);
    report.ism_averaged_distance = nearest_mode_distance(oracle, label, mean_of(ism_flat));
    report.ism_mean_of_distances = mean_distance(ism_flat);

    if (out.empty()) return report;
    auto csv = open_csv(out / "consistency.csv");
    csv << "t,sds_variance,ism_variance,sds_mean_distance,ism_distance\n";
    for (const auto& r : report.rows) {
        csv << r.t << ',' << r.sds_variance << ',' << r.ism_variance << ','
            << r.sds_mean_distance << ',' << r.ism_distance << '\n';
    }
    if (const auto shape = gen->image_shape()) {
        write_ppm_grid(out / "frames" / "sds_pseudo_gt_grid.ppm", sds_all, (*shape)[0],
                       (*shape)[1], (*shape)[2]);
        write_ppm_grid(out / "frames" / "ism_pseudo_gt_grid.ppm", ism_all, (*shape)[0],
                       (*shape)[1], (*shape)[2]);
    }
    double max_ism_var = 0.0;
    for (const auto& r : report.rows) max_ism_var = std::max(max_ism_var, r.ism_variance);
    write_report(out, {{"kind", "consistency"},
                       {"noise_draws", k_draws},
                       {"max_ism_across_noise_variance", max_ism_var},
                       {"sds_across_t_variance", report.sds_across_t_variance},
                       {"ism_across_t_variance", report.ism_across_t_variance},
                       {"sds_averaged_distance", report.sds_averaged_distance},
                       {"sds_mean_of_distances", report.sds_mean_of_distances},
                       {"ism_averaged_distance", report.ism_averaged_distance},
                       {"ism_mean_of_distances", report.ism_mean_of_distances}});
    return report;
}

std::vector<QualityRow>
run_quality(const ExperimentConfig& config, const fs::path& out) {
    const NoiseSchedule schedule = config.schedule.build();
    MixtureOracle oracle = config.oracle.build();
    const GridConfig& grids = config.grids;
    const GuidanceSpec& guidance = config.distill.guidance;
    const Label& label = config.distill.effective_metric_label();
    require_timestep_grid(grids.t_values, schedule);
    oracle.validate(guidance);

    Rng point_rng(config.seed, 0xA11);
    std::vector<Vec> points;
    for (int i = 0; i < grids.start_points; ++i) {
        points.push_back(sample_mixture(oracle, label, point_rng));
    }

    std::vector<QualityRow> rows;
    for (int t : grids.t_values) {
        Rng noise_rng(config.seed, 0xB00000ULL + static_cast<std::uint64_t>(t));
        QualityRow row;
        row.t = t;
        std::uint64_t calls = 0;
        for (const auto& x0 : points) {
            const Vec xt = add_noise(schedule, x0, t, noise_rng.normal_vector(oracle.dim()));
            const Vec eps = oracle.eps_guided(schedule, xt, t, guidance);
            row.err_single +=
                nearest_mode_distance(oracle, label, pseudo_gt_single(schedule, xt, t, eps));
            const std::uint64_t before = oracle.request_count();
            const Vec multi = ddim_denoise(oracle, schedule, xt, t,
                                           std::min(grids.denoise_stride, t), guidance);
            calls += oracle.request_count() - before;
            row.err_multi += nearest_mode_distance(oracle, label, multi);
        }
        const double n = static_cast<double>(points.size());
        row.err_single /= n;
        row.err_multi /= n;
        row.oracle_calls_multi = static_cast<double>(calls) / n;
        rows.push_back(row);
    }

    if (out.empty()) return rows;
    auto csv = open_csv(out / "quality.csv");
    csv << "t,err_single,err_multi,oracle_calls_multi\n";
    json table = json::array();
    for (const auto& r : rows) {
        csv << r.t << ',' << r.err_single << ',' << r.err_multi << ',' << r.oracle_calls_multi
            << '\n';
        table.push_back({{"t", r.t}, {"err_single", r.err_single}, {"err_multi", r.err_multi}});
    }
    write_report(out, {{"kind", "quality"}, {"start_points", grids.start_points}, {"rows", table}});
    return rows;
}

EtaReport
run_eta_sweep(const ExperimentConfig& config, const fs::path& out) {
    const NoiseSchedule schedule = config.schedule.build();
    MixtureOracle oracle = config.oracle.build();
    const GridConfig& grids = config.grids;
    const GuidanceSpec& guidance = config.distill.guidance;
    const Label& label = config.distill.effective_metric_label();
    const GradcheckConfig& tol = config.gradcheck;
    require_timestep_grid(grids.t_values, schedule);
    oracle.validate(guidance);
    for (int dt : grids.delta_T_values) {
        if (dt < 1) throw ConfigError("delta_T grid values must be >= 1");
    }

    Rng point_rng(config.seed, 0xE7A);
    std::vector<Vec> points;
    for (int i = 0; i < grids.start_points; ++i) {
        points.push_back(sample_mixture(oracle, label, point_rng));
    }

    EtaReport report;
    for (int t : grids.t_values) {
        for (int dt : grids.delta_T_values) {
            if (dt > t) continue;
            for (std::size_t p = 0; p < points.size(); ++p) {
                const EtaAnalysis a = analyze_eta(oracle, schedule, points[p], t, dt, guidance);
                EtaRow row;
                row.t = t;
                row.delta_T = dt;
                row.point = static_cast<int>(p);
                row.eta_norm = a.eta_residual.norm();
                row.interval_norm = schedule.gamma(t) * a.interval_score.norm();
                row.ratio = row.interval_norm > 0.0 ? row.eta_norm / row.interval_norm : 0.0;
                row.decomposition_residual = a.decomposition_residual(schedule);
                row.series_disagreement = a.series_disagreement();
                row.naive_calls = a.oracle_calls;
                if (dt < t) {
                    const int ds = std::min(grids.delta_S_values.front(), t - dt);
                    row.ism_calls =
                        ism_gradient(oracle, schedule, points[p], t, dt, ds, guidance).oracle_calls;
                } else {
                    report.max_single_interval_eta =
                        std::max(report.max_single_interval_eta, row.eta_norm);
                }
                report.max_decomposition_residual =
                    std::max(report.max_decomposition_residual, row.decomposition_residual);
                report.rows.push_back(row);
            }
        }
    }
    report.passed = report.max_decomposition_residual < tol.decomposition_tolerance &&
                    report.max_single_interval_eta < tol.single_interval_tolerance;

    if (out.empty()) return report;
    auto csv = open_csv(out / "eta_sweep.csv");
    csv << "t,delta_T,point,eta_norm,interval_norm,ratio,decomposition_residual,"
           "series_disagreement,naive_calls,ism_calls\n";
    for (const auto& r : report.rows) {
        csv << r.t << ',' << r.delta_T << ',' << r.point << ',' << r.eta_norm << ','
            << r.interval_norm << ',' << r.ratio << ',' << r.decomposition_residual << ','
            << r.series_disagreement << ',' << r.naive_calls << ',';
        if (r.ism_calls) csv << *r.ism_calls;
        csv << '\n';
    }
    auto summary = open_csv(out / "eta_summary.csv");
    summary << "delta_T,rows,mean_eta_norm,mean_ratio\n";
    json per_dt = json::array();
    for (int dt : grids.delta_T_values) {
        int n = 0;
        double eta = 0.0, ratio = 0.0;
        for (const auto& r : report.rows) {
            if (r.delta_T != dt) continue;
            ++n;
            eta += r.eta_norm;
            ratio += r.ratio;
        }
        if (n == 0) continue;
        summary << dt << ',' << n << ',' << eta / n << ',' << ratio / n << '\n';
        per_dt.push_back({{"delta_T", dt}, {"mean_eta_norm", eta / n}, {"mean_ratio", ratio / n}});
    }
    write_report(out, {{"kind", "eta-sweep"},
                       {"passed", report.passed},
                       {"max_decomposition_residual", report.max_decomposition_residual},
                       {"max_single_interval_eta", report.max_single_interval_eta},
                       {"per_delta_T", per_dt}});
    return report;
}

std::vector<SweepCell>
run_interval_sweep(const ExperimentConfig& config, const fs::path& out) {
    const NoiseSchedule schedule = config.schedule.build();
    const MixtureOracle oracle = config.oracle.build();
    const GridConfig& grids = config.grids;
    const auto generator = config.generator.build(oracle.dim());

    std::vector<SweepCell> cells;
    std::vector<DistillConfig> cell_configs;
    for (int dt : grids.delta_T_values) {
        for (int ds : grids.delta_S_values) {
            DistillConfig cfg = config.distill;
            cfg.delta_T_start = cfg.delta_T_end = dt;
            cfg.delta_S = ds;
            cfg.t_min = std::max(cfg.t_min, dt + 20);
            cfg.validate(schedule, oracle);
            SweepCell cell;
            cell.delta_T = dt;
            cell.delta_S = ds;
            cells.push_back(std::move(cell));
            cell_configs.push_back(cfg);
        }
    }

    parallel_for(cells.size(), config.threads, [&](std::size_t i) {
        const MixtureOracle local = oracle;
        cells[i].log = run_distillation(*generator, local, schedule, cell_configs[i]);
        cells[i].final_distance = cells[i].log.final_distance();
        cells[i].total_oracle_calls = cells[i].log.total_oracle_calls();
        cells[i].wall_time = cells[i].log.rows.empty() ? 0.0 : cells[i].log.rows.back().wall_time;
    });

    if (out.empty()) return cells;
    auto csv = open_csv(out / "interval_sweep.csv");
    csv << "delta_T,delta_S,final_distance,total_oracle_calls,wall_time\n";
    json table = json::array();
    const auto shape = generator->image_shape();
    for (const auto& c : cells) {
        csv << c.delta_T << ',' << c.delta_S << ',' << c.final_distance << ','
            << c.total_oracle_calls << ',' << c.wall_time << '\n';
        table.push_back({{"delta_T", c.delta_T},
                         {"delta_S", c.delta_S},
                         {"final_distance", c.final_distance},
                         {"total_oracle_calls", c.total_oracle_calls},
                         {"aborted", c.log.aborted}});
        std::ostringstream name;
        name << "cell_dT" << c.delta_T << "_dS" << c.delta_S;
        std::ofstream metrics = open_csv(out / (name.str() + "_metrics.csv"));
        write_metrics_csv(metrics, c.log);
        if (shape) {
            write_ppm(out / "frames" / (name.str() + ".ppm"), c.log.final_render, (*shape)[0],
                      (*shape)[1], (*shape)[2]);
        }
    }
    write_report(out, {{"kind", "interval-sweep"}, {"cells", table}});
    return cells;
}

std::optional<int>
first_crossing(const RunLog& log, double threshold) {
    if (log.initial_distance <= threshold) return 0;
    for (const auto& row : log.rows) {
        if (row.nearest_mode_distance <= threshold) return row.iter + 1;
    }
    return std::nullopt;
}

RaceReport
run_race(const ExperimentConfig& config, const fs::path& out) {
    const NoiseSchedule schedule = config.schedule.build();
    const MixtureOracle oracle = config.oracle.build();
    const auto generator = config.generator.build(oracle.dim());
    const auto& seeds = config.grids.seeds;
    if (seeds.size() < 2) throw ConfigError("a race needs at least 2 seeds");

    RaceReport report;
    report.first = config.race.first;
    report.second = config.race.second;
    report.threshold = config.race.threshold;
    report.pairs.resize(seeds.size());
    for (std::size_t i = 0; i < seeds.size(); ++i) report.pairs[i].seed = seeds[i];

    auto make_config = [&](std::uint64_t seed, Objective objective) {
        DistillConfig cfg = config.distill;
        cfg.seed = seed;
        cfg.objective = objective;
        return cfg;
    };
    make_config(seeds.front(), report.first).validate(schedule, oracle);

    parallel_for(2 * seeds.size(), config.threads, [&](std::size_t job) {
        RacePair& pair = report.pairs[job / 2];
        const bool first = job % 2 == 0;
        const DistillConfig cfg = make_config(pair.seed, first ? report.first : report.second);
        const MixtureOracle local = oracle;
        (first ? pair.first : pair.second) = run_distillation(*generator, local, schedule, cfg);
    });

    std::vector<std::optional<int>> a, b;
    for (auto& pair : report.pairs) {
        pair.first_crossing = first_crossing(pair.first, report.threshold);
        pair.second_crossing = first_crossing(pair.second, report.threshold);
        a.push_back(pair.first_crossing);
        b.push_back(pair.second_crossing);
    }
    report.first_median_crossing = median_crossing(a);
    report.second_median_crossing = median_crossing(b);

    if (out.empty()) return report;
    const std::string na(to_string(report.first)), nb(to_string(report.second));
    auto csv = open_csv(out / "race.csv");
    csv << "seed,objective,crossing,final_distance,total_oracle_calls\n";
    auto curves = open_csv(out / "race_curves.csv");
    curves << "seed,objective,iter,nearest_mode_distance\n";
    json pairs = json::array();
    for (const auto& p : report.pairs) {
        for (int side = 0; side < 2; ++side) {
            const RunLog& log = side == 0 ? p.first : p.second;
            const std::string& name = side == 0 ? na : nb;
            const auto& crossing = side == 0 ? p.first_crossing : p.second_crossing;
            csv << p.seed << ',' << name << ',';
            if (crossing) csv << *crossing;
            csv << ',' << log.final_distance() << ',' << log.total_oracle_calls() << '\n';
            curves << p.seed << ',' << name << ",0," << log.initial_distance << '\n';
            for (const auto& row : log.rows) {
                curves << p.seed << ',' << name << ',' << row.iter + 1 << ','
                       << row.nearest_mode_distance << '\n';
            }
        }
        pairs.push_back({{"seed", p.seed},
                         {na + "_crossing", optional_json(p.first_crossing)},
                         {nb + "_crossing", optional_json(p.second_crossing)},
                         {na + "_final_distance", p.first.final_distance()},
                         {nb + "_final_distance", p.second.final_distance()}});
    }
    write_report(out, {{"kind", "race"},
                       {"threshold", report.threshold},
                       {"first", na},
                       {"second", nb},
                       {na + "_median_crossing", number_or_null(report.first_median_crossing)},
                       {nb + "_median_crossing", number_or_null(report.second_median_crossing)},
                       {"pairs", pairs}});
    return report;
}

RunLog
run_distill(const ExperimentConfig& config, const fs::path& out) {
    const NoiseSchedule schedule = config.schedule.build();
    const MixtureOracle oracle = config.oracle.build();
    const auto generator = config.generator.build(oracle.dim());
    RunLog log = run_distillation(*generator, oracle, schedule, config.distill);
    if (out.empty()) return log;

    auto csv = open_csv(out / "metrics.csv");
    write_metrics_csv(csv, log);
    write_frames(out / "frames", *generator, log);
    json report = {{"kind", "distill"},
                   {"objective", to_string(config.distill.objective)},
                   {"iterations", log.rows.size()},
                   {"initial_distance", log.initial_distance},
                   {"final_distance", number_or_null(log.final_distance())},
                   {"total_oracle_calls", log.total_oracle_calls()},
                   {"aborted", log.aborted}};
    if (log.aborted) report["abort_reason"] = log.abort_reason;
    if (config.generator.kind == GeneratorKind::Splat) {
        auto final_gen = generator->clone();
        final_gen->set_parameters(log.final_theta);
        report["final_scene"] =
            scene_to_json(static_cast<const SplatGenerator&>(*final_gen).scene());
    } else {
        report["final_theta"] =
            std::vector<double>(log.final_theta.data(), log.final_theta.data() + log.final_theta.size());
    }
    write_report(out, report);
    return log;
}

int
run_named_experiment(std::string_view kind, const ExperimentConfig& config, const fs::path& out) {
    if (kind == "consistency") {
        const auto report = run_consistency(config, out);
        for (const auto& row : report.rows) {
            if (row.ism_variance != 0.0) return 2;
        }
        return 0;
    }
    if (kind == "quality") {
        run_quality(config, out);
        return 0;
    }
    if (kind == "eta-sweep") return run_eta_sweep(config, out).passed ? 0 : 2;
    if (kind == "interval-sweep") {
        run_interval_sweep(config, out);
        return 0;
    }
    if (kind == "race") {
        run_race(config, out);
        return 0;
    }
    if (kind == "gradcheck") return run_gradcheck(config, out).passed() ? 0 : 2;
    if (kind == "distill") return run_distill(config, out).aborted ? 2 : 0;
    throw ConfigError("unknown experiment kind '" + std::string(kind) + "'");
}

} // namespace ismlab
