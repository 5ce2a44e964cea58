// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/config.hpp"

#include "ismlab/errors.hpp"

#include <fstream>
#include <set>

namespace ismlab {

using nlohmann::json;

namespace {

// Typed, path-aware view of one JSON object. Unknown keys are rejected so a
// misspelled option never silently falls back to its default.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(label() + " must be an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        const std::set<std::string> known(keys.begin(), keys.end());
        for (const auto& item : j_.items()) {
            if (!known.contains(item.key())) {
                throw ConfigError("unknown config key '" + key_path(item.key()) + "'");
            }
        }
    }

    bool has(const char* key) const { return j_.contains(key); }

    template <class T>
    void get(const char* key, T& out) const {
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception& err) {
            throw ConfigError("bad value for '" + key_path(key) + "': " + err.what());
        }
    }

    void get_vec(const char* key, Vec& out) const {
        if (!j_.contains(key)) return;
        std::vector<double> values;
        get(key, values);
        out = Eigen::Map<const Vec>(values.data(), static_cast<Eigen::Index>(values.size()));
    }

    Section child(const char* key) const { return Section(j_.at(key), key_path(key)); }
    const json& raw(const char* key) const { return j_.at(key); }
    std::string key_path(const std::string& key) const {
        return path_.empty() ? key : path_ + "." + key;
    }

private:
    std::string label() const { return path_.empty() ? "config root" : "'" + path_ + "'"; }

    const json& j_;
    std::string path_;
};

template <class Fn>
auto
rethrow_as_config(const std::string& key, Fn&& fn) {
    try {
        return fn();
    } catch (const ConfigError&) {
        throw;
    } catch (const std::invalid_argument& err) {
        throw ConfigError("bad value for '" + key + "': " + err.what());
    }
}

void
parse_schedule(const Section& s, ScheduleConfig& cfg) {
    s.allow({"T", "beta_start", "beta_end", "omega"});
    s.get("T", cfg.steps);
    s.get("beta_start", cfg.beta_start);
    s.get("beta_end", cfg.beta_end);
    if (s.has("omega")) {
        std::string name;
        s.get("omega", name);
        cfg.omega = rethrow_as_config(s.key_path("omega"),
                                      [&] { return omega_kind_from_string(name); });
    }
}

void
parse_oracle(const Section& s, OracleConfig& cfg) {
    s.allow({"dim", "components", "labels"});
    if (!s.has("components")) throw ConfigError("'oracle.components' is required");
    const json& comps = s.raw("components");
    if (!comps.is_array() || comps.empty()) {
        throw ConfigError("'oracle.components' must be a non-empty array");
    }
    cfg.components.clear();
    for (std::size_t i = 0; i < comps.size(); ++i) {
        const Section c(comps[i], "oracle.components[" + std::to_string(i) + "]");
        c.allow({"weight", "mean", "sigma"});
        if (!c.has("mean")) throw ConfigError("'" + c.key_path("mean") + "' is required");
        MixtureComponent comp;
        c.get("weight", comp.weight);
        c.get_vec("mean", comp.mean);
        c.get("sigma", comp.sigma);
        cfg.components.push_back(std::move(comp));
    }
    if (s.has("dim")) {
        int dim = 0;
        s.get("dim", dim);
        for (const auto& comp : cfg.components) {
            if (comp.mean.size() != dim) {
                throw ConfigError("'oracle.dim' disagrees with a component mean");
            }
        }
    }
    if (s.has("labels")) s.get("labels", cfg.labels);
    // Construct once so label and weight errors surface as config errors.
    rethrow_as_config("oracle", [&] { return cfg.build(); });
}

void
parse_guidance(const Section& s, GuidanceSpec& g) {
    s.allow({"positive", "negative", "scale"});
    s.get("positive", g.positive);
    s.get("negative", g.negative);
    s.get("scale", g.scale);
}

void
parse_jitter(const Section& s, ViewJitterSpec& j) {
    s.allow({"max_rotation", "zoom_min", "zoom_max", "max_translation"});
    s.get("max_rotation", j.max_rotation);
    s.get("zoom_min", j.zoom_min);
    s.get("zoom_max", j.zoom_max);
    s.get("max_translation", j.max_translation);
}

void
parse_distill(const Section& s, DistillConfig& d) {
    s.allow({"objective", "iterations", "t_min", "t_max", "delta_T_start", "delta_T_end",
             "delta_S", "view_batch", "seed", "snapshot_every", "metric_label", "optimizer",
             "jitter"});
    if (s.has("objective")) {
        std::string name;
        s.get("objective", name);
        d.objective = objective_from_string(name);
    }
    s.get("iterations", d.iterations);
    s.get("t_min", d.t_min);
    s.get("t_max", d.t_max);
    s.get("delta_T_start", d.delta_T_start);
    s.get("delta_T_end", d.delta_T_end);
    s.get("delta_S", d.delta_S);
    s.get("view_batch", d.view_batch);
    s.get("seed", d.seed);
    s.get("snapshot_every", d.snapshot_every);
    s.get("metric_label", d.metric_label);
    if (s.has("optimizer")) {
        const Section o = s.child("optimizer");
        o.allow({"step_size", "beta1", "beta2", "eps_hat"});
        o.get("step_size", d.optimizer.step_size);
        o.get("beta1", d.optimizer.beta1);
        o.get("beta2", d.optimizer.beta2);
        o.get("eps_hat", d.optimizer.eps_hat);
    }
    if (s.has("jitter")) parse_jitter(s.child("jitter"), d.jitter);
}

void
parse_generator(const Section& s, GeneratorConfig& g) {
    s.allow({"kind", "theta", "width", "height", "truncation_sigmas", "splat", "scene"});
    if (s.has("kind")) {
        std::string kind;
        s.get("kind", kind);
        if (kind == "identity") {
            g.kind = GeneratorKind::Identity;
        } else if (kind == "splat") {
            g.kind = GeneratorKind::Splat;
        } else {
            throw ConfigError("'generator.kind' must be 'identity' or 'splat'");
        }
    }
    s.get_vec("theta", g.theta);
    s.get("width", g.width);
    s.get("height", g.height);
    s.get("truncation_sigmas", g.render.truncation_sigmas);
    if (s.has("splat")) {
        const Section p = s.child("splat");
        p.allow({"count", "channels", "seed", "margin", "scale", "color_lo", "color_hi",
                 "logit_opacity", "background"});
        p.get("count", g.splat.count);
        p.get("channels", g.splat.channels);
        p.get("seed", g.splat.seed);
        p.get("margin", g.splat.margin);
        p.get("scale", g.splat.scale);
        p.get("color_lo", g.splat.color_lo);
        p.get("color_hi", g.splat.color_hi);
        p.get("logit_opacity", g.splat.logit_opacity);
        p.get("background", g.splat.background);
    }
    if (s.has("scene")) g.scene = scene_from_json(s.raw("scene"));
}

template <class T>
void
require_non_empty(const std::vector<T>& v, const char* key) {
    if (v.empty()) throw ConfigError(std::string("'") + key + "' must be non-empty");
}

void
parse_grids(const Section& s, GridConfig& g) {
    s.allow({"t_values", "delta_T_values", "delta_S_values", "noise_draws", "seeds",
             "start_points", "denoise_stride"});
    s.get("t_values", g.t_values);
    s.get("delta_T_values", g.delta_T_values);
    s.get("delta_S_values", g.delta_S_values);
    s.get("noise_draws", g.noise_draws);
    s.get("seeds", g.seeds);
    s.get("start_points", g.start_points);
    s.get("denoise_stride", g.denoise_stride);
    require_non_empty(g.t_values, "grids.t_values");
    require_non_empty(g.delta_T_values, "grids.delta_T_values");
    require_non_empty(g.delta_S_values, "grids.delta_S_values");
    require_non_empty(g.seeds, "grids.seeds");
    if (g.start_points < 1) throw ConfigError("'grids.start_points' must be >= 1");
    if (g.denoise_stride < 1) throw ConfigError("'grids.denoise_stride' must be >= 1");
}

void
parse_gradcheck(const Section& s, GradcheckConfig& g) {
    s.allow({"checks", "score_cases", "renderer_scenes", "identity_cases", "score_step",
             "render_step", "score_tolerance", "render_tolerance", "forms_tolerance",
             "decomposition_tolerance", "single_interval_tolerance"});
    s.get("checks", g.checks);
    for (const auto& name : g.checks) {
        if (name != "score" && name != "renderer" && name != "sds_forms" &&
            name != "decomposition") {
            throw ConfigError("unknown gradcheck check '" + name + "'");
        }
    }
    s.get("score_cases", g.score_cases);
    s.get("renderer_scenes", g.renderer_scenes);
    s.get("identity_cases", g.identity_cases);
    s.get("score_step", g.score_step);
    s.get("render_step", g.render_step);
    s.get("score_tolerance", g.score_tolerance);
    s.get("render_tolerance", g.render_tolerance);
    s.get("forms_tolerance", g.forms_tolerance);
    s.get("decomposition_tolerance", g.decomposition_tolerance);
    s.get("single_interval_tolerance", g.single_interval_tolerance);
}

} // namespace

NoiseSchedule
ScheduleConfig::build() const {
    return NoiseSchedule::linear(steps, beta_start, beta_end, omega);
}

MixtureOracle
OracleConfig::build() const {
    return MixtureOracle(components, labels);
}

std::unique_ptr<Generator>
GeneratorConfig::build(int dim) const {
    if (kind == GeneratorKind::Identity) {
        if (theta.size() == 0) return std::make_unique<IdentityLatent>(Vec::Zero(dim));
        return std::make_unique<IdentityLatent>(theta);
    }
    SplatScene init = scene ? *scene : random_scene(splat, width, height);
    return std::make_unique<SplatGenerator>(std::move(init), width, height, render);
}

ExperimentConfig
parse_config(const json& root) {
    const Section s(root, "");
    s.allow({"schedule", "oracle", "guidance", "generator", "distill", "grids", "race",
             "gradcheck", "seed", "threads"});
    ExperimentConfig cfg;
    if (s.has("schedule")) parse_schedule(s.child("schedule"), cfg.schedule);
    rethrow_as_config("schedule", [&] { return cfg.schedule.build(); });
    if (!s.has("oracle")) throw ConfigError("'oracle' section is required");
    parse_oracle(s.child("oracle"), cfg.oracle);
    if (s.has("guidance")) parse_guidance(s.child("guidance"), cfg.distill.guidance);
    if (s.has("generator")) parse_generator(s.child("generator"), cfg.generator);
    if (s.has("distill")) parse_distill(s.child("distill"), cfg.distill);
    if (s.has("grids")) parse_grids(s.child("grids"), cfg.grids);
    if (s.has("race")) {
        const Section r = s.child("race");
        r.allow({"threshold", "first", "second"});
        r.get("threshold", cfg.race.threshold);
        std::string name;
        if (r.has("first")) {
            r.get("first", name);
            cfg.race.first = objective_from_string(name);
        }
        if (r.has("second")) {
            r.get("second", name);
            cfg.race.second = objective_from_string(name);
        }
    }
    if (s.has("gradcheck")) parse_gradcheck(s.child("gradcheck"), cfg.gradcheck);
    s.get("seed", cfg.seed);
    s.get("threads", cfg.threads);

    const MixtureOracle oracle = cfg.oracle.build();
    rethrow_as_config("guidance", [&] {
        oracle.validate(cfg.distill.guidance);
        return 0;
    });
    if (cfg.generator.kind == GeneratorKind::Identity && cfg.generator.theta.size() != 0 &&
        cfg.generator.theta.size() != oracle.dim()) {
        throw ConfigError("'generator.theta' dimension differs from the oracle");
    }
    return cfg;
}

ExperimentConfig
load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json root;
    try {
        root = json::parse(in);
    } catch (const json::parse_error& err) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + err.what());
    }
    return parse_config(root);
}

json
scene_to_json(const SplatScene& scene) {
    json splats = json::array();
    for (const auto& sp : scene.splats) {
        splats.push_back({
            {"center", {sp.center.x(), sp.center.y()}},
            {"log_scale", {sp.log_scale.x(), sp.log_scale.y()}},
            {"rotation", sp.rotation},
            {"color", std::vector<double>(sp.color.data(), sp.color.data() + sp.color.size())},
            {"logit_opacity", sp.logit_opacity},
            {"depth", sp.depth},
        });
    }
    return {{"splats", splats},
            {"background", std::vector<double>(scene.background.data(),
                                               scene.background.data() + scene.background.size())}};
}

SplatScene
scene_from_json(const json& j) {
    const Section s(j, "generator.scene");
    s.allow({"splats", "background"});
    SplatScene scene;
    s.get_vec("background", scene.background);
    if (!s.has("splats") || !s.raw("splats").is_array()) {
        throw ConfigError("'generator.scene.splats' must be an array");
    }
    const json& arr = s.raw("splats");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const Section p(arr[i], "generator.scene.splats[" + std::to_string(i) + "]");
        p.allow({"center", "log_scale", "rotation", "color", "logit_opacity", "depth"});
        Splat2D sp;
        Vec center = sp.center, log_scale = sp.log_scale;
        p.get_vec("center", center);
        p.get_vec("log_scale", log_scale);
        if (center.size() != 2 || log_scale.size() != 2) {
            throw ConfigError("'" + p.key_path("center") + "' and log_scale need 2 entries");
        }
        sp.center = center;
        sp.log_scale = log_scale;
        p.get("rotation", sp.rotation);
        p.get_vec("color", sp.color);
        p.get("logit_opacity", sp.logit_opacity);
        sp.depth = static_cast<double>(i);
        p.get("depth", sp.depth);
        scene.splats.push_back(std::move(sp));
    }
    rethrow_as_config("generator.scene", [&] {
        scene.validate();
        return 0;
    });
    return scene;
}

} // namespace ismlab
