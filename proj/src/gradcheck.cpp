// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/errors.hpp"
#include "ismlab/experiments.hpp"
#include "ismlab/io.hpp"
#include "ismlab/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

namespace ismlab {

using nlohmann::json;

namespace {

// Relative error with a floor below which differences are finite-difference
// noise rather than gradient error.
double
relative_error(double analytic, double numeric, double floor) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

// A draw from the noised, label-restricted mixture at timestep t.
Vec
noised_sample(const MixtureOracle& oracle, const NoiseSchedule& schedule, const Label& label,
              int t, Rng& rng) {
    const Vec x0 = sample_mixture(oracle, label, rng);
    return add_noise(schedule, x0, t, rng.normal_vector(oracle.dim()));
}

GradcheckRow
check_score(const ExperimentConfig& cfg, const MixtureOracle& oracle,
            const NoiseSchedule& schedule) {
    const GradcheckConfig& g = cfg.gradcheck;
    GradcheckRow row{"score", g.score_cases, 0.0, g.score_tolerance, true};
    std::vector<Label> labels;
    for (const auto& item : oracle.labels()) labels.push_back(item.first);

    Rng rng(cfg.seed, 0x5C07E);
    const double h = g.score_step;
    for (int i = 0; i < g.score_cases; ++i) {
        const Label& label = labels[static_cast<std::size_t>(i) % labels.size()];
        const int t = rng.uniform_int(1, schedule.steps());
        Vec x = noised_sample(oracle, schedule, label, t, rng);
        const Vec eps = oracle.eps_predict(schedule, x, t, label);
        Vec fd(x.size());
        for (Eigen::Index k = 0; k < x.size(); ++k) {
            const double keep = x[k];
            x[k] = keep + h;
            const double up = oracle.log_density(schedule, x, t, label);
            x[k] = keep - h;
            const double down = oracle.log_density(schedule, x, t, label);
            x[k] = keep;
            fd[k] = -schedule.sqrt_one_minus_alpha_bar(t) * (up - down) / (2.0 * h);
        }
        const double scale = std::max(eps.norm(), fd.norm());
        const double err = scale > 0.0 ? (eps - fd).norm() / scale : 0.0;
        row.max_error = std::max(row.max_error, err);
    }
    row.passed = row.max_error < row.tolerance;
    return row;
}

SplatScene
random_check_scene(Rng& rng, int width, int height, int channels) {
    SplatScene scene;
    scene.background = Eigen::VectorXd(channels);
    for (int c = 0; c < channels; ++c) scene.background[c] = rng.uniform();
    for (int i = 0; i < 3; ++i) {
        Splat2D sp;
        sp.center = Eigen::Vector2d(rng.uniform(2.0, width - 2.0), rng.uniform(2.0, height - 2.0));
        sp.log_scale = Eigen::Vector2d(rng.uniform(0.0, std::log(3.0)),
                                       rng.uniform(0.0, std::log(3.0)));
        sp.rotation = rng.uniform(-std::numbers::pi, std::numbers::pi);
        sp.color = Eigen::VectorXd(channels);
        for (int c = 0; c < channels; ++c) sp.color[c] = rng.uniform();
        sp.logit_opacity = rng.uniform(-2.0, 2.0);
        sp.depth = rng.uniform();
        scene.splats.push_back(std::move(sp));
    }
    return scene;
}

GradcheckRow
check_renderer(const ExperimentConfig& cfg, const GradcheckHooks& hooks) {
    const GradcheckConfig& g = cfg.gradcheck;
    GradcheckRow row{"renderer", g.renderer_scenes, 0.0, g.render_tolerance, true};
    const int w = cfg.generator.width, hgt = cfg.generator.height;
    const int channels = cfg.generator.splat.channels;
    const RenderOptions& opts = cfg.generator.render;
    const ViewJitterSpec jitter{0.3, 0.8, 1.2, 1.0};
    const double h = g.render_step;
    constexpr double kNoiseFloor = 1e-6;

    Rng rng(cfg.seed, 0x9E4D);
    for (int s = 0; s < g.renderer_scenes; ++s) {
        SplatScene scene = random_check_scene(rng, w, hgt, channels);
        const View view = sample_view(rng.next_u64(), jitter, w, hgt);
        const Vec weights = rng.normal_vector(static_cast<Eigen::Index>(w) * hgt * channels);

        Vec analytic = flatten_gradient(render_backward(scene, view, weights, opts));
        if (hooks.renderer_fault) hooks.renderer_fault(analytic);

        Vec params = flatten_parameters(scene);
        for (Eigen::Index k = 0; k < params.size(); ++k) {
            const double keep = params[k];
            params[k] = keep + h;
            unflatten_parameters(scene, params);
            const double up = weights.dot(render(scene, view, opts));
            params[k] = keep - h;
            unflatten_parameters(scene, params);
            const double down = weights.dot(render(scene, view, opts));
            params[k] = keep;
            const double fd = (up - down) / (2.0 * h);
            row.max_error = std::max(row.max_error, relative_error(analytic[k], fd, kNoiseFloor));
        }
        unflatten_parameters(scene, params);
    }
    row.passed = row.max_error < row.tolerance;
    return row;
}

GradcheckRow
check_sds_forms(const ExperimentConfig& cfg, const MixtureOracle& oracle,
                const NoiseSchedule& schedule) {
    const GradcheckConfig& g = cfg.gradcheck;
    GradcheckRow row{"sds_forms", g.identity_cases, 0.0, g.forms_tolerance, true};
    Rng rng(cfg.seed, 0x5D5);
    for (int i = 0; i < g.identity_cases; ++i) {
        const Vec x0 = sample_mixture(oracle, kNullLabel, rng) + rng.normal_vector(oracle.dim());
        const int t = rng.uniform_int(1, schedule.steps());
        const Vec eps = rng.normal_vector(oracle.dim());
        const GradientReport r =
            sds_gradient(oracle, schedule, x0, t, eps, cfg.distill.guidance);
        const Vec other = schedule.omega(t) / schedule.gamma(t) * (x0 - r.pseudo_gt);
        row.max_error = std::max(row.max_error, (r.grad_x0 - other).cwiseAbs().maxCoeff());
    }
    row.passed = row.max_error < row.tolerance;
    return row;
}

std::vector<GradcheckRow>
check_decomposition(const ExperimentConfig& cfg, const MixtureOracle& oracle,
                    const NoiseSchedule& schedule) {
    const GradcheckConfig& g = cfg.gradcheck;
    GradcheckRow general{"decomposition", g.identity_cases, 0.0, g.decomposition_tolerance, true};
    GradcheckRow single{"single_interval", g.identity_cases, 0.0, g.single_interval_tolerance,
                        true};
    Rng rng(cfg.seed, 0xDEC0);
    for (int i = 0; i < g.identity_cases; ++i) {
        const Vec x0 = sample_mixture(oracle, kNullLabel, rng) + rng.normal_vector(oracle.dim());
        const int t = rng.uniform_int(2, schedule.steps());
        const int dt = rng.uniform_int(1, t);
        general.max_error = std::max(
            general.max_error,
            decomposition_check(oracle, schedule, x0, t, dt, cfg.distill.guidance));
        const EtaAnalysis a = analyze_eta(oracle, schedule, x0, t, t, cfg.distill.guidance);
        single.max_error = std::max(single.max_error, a.eta_residual.norm());
    }
    general.passed = general.max_error < general.tolerance;
    single.passed = single.max_error < single.tolerance;
    return {general, single};
}

} // namespace

bool
GradcheckReport::passed() const {
    return std::all_of(rows.begin(), rows.end(), [](const auto& r) { return r.passed; });
}

GradcheckReport
run_gradcheck(const ExperimentConfig& config, const std::filesystem::path& out,
              const GradcheckHooks& hooks) {
    const NoiseSchedule schedule = config.schedule.build();
    const MixtureOracle oracle = config.oracle.build();
    oracle.validate(config.distill.guidance);

    GradcheckReport report;
    for (const auto& name : config.gradcheck.checks) {
        if (name == "score") {
            report.rows.push_back(check_score(config, oracle, schedule));
        } else if (name == "renderer") {
            report.rows.push_back(check_renderer(config, hooks));
        } else if (name == "sds_forms") {
            report.rows.push_back(check_sds_forms(config, oracle, schedule));
        } else if (name == "decomposition") {
            for (auto& row : check_decomposition(config, oracle, schedule)) {
                report.rows.push_back(std::move(row));
            }
        } else {
            throw ConfigError("unknown gradcheck check '" + name + "'");
        }
    }

    if (out.empty()) return report;
    std::filesystem::create_directories(out);
    std::ofstream csv(out / "gradcheck.csv");
    csv.precision(17);
    csv << "check,cases,max_error,tolerance,passed\n";
    json rows = json::array();
    for (const auto& r : report.rows) {
        csv << r.name << ',' << r.cases << ',' << r.max_error << ',' << r.tolerance << ','
            << (r.passed ? "true" : "false") << '\n';
        rows.push_back({{"check", r.name},
                        {"cases", r.cases},
                        {"max_error", r.max_error},
                        {"tolerance", r.tolerance},
                        {"passed", r.passed}});
    }
    write_text_file(out / "report.json",
                    json{{"kind", "gradcheck"}, {"passed", report.passed()}, {"checks", rows}}
                            .dump(2) +
                        "\n");
    return report;
}

} // namespace ismlab
