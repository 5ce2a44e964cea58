// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ismlab/distill.hpp"
#include "ismlab/generators.hpp"
#include "ismlab/oracle.hpp"
#include "ismlab/schedule.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace ismlab {

struct ScheduleConfig {
    int steps = 1000;
    double beta_start = 0.00085;
    double beta_end = 0.012;
    OmegaKind omega = OmegaKind::Unit;

    NoiseSchedule build() const;
};

struct OracleConfig {
    std::vector<MixtureComponent> components;
    std::map<Label, std::vector<std::size_t>> labels;

    MixtureOracle build() const;
};

enum class GeneratorKind { Identity, Splat };

struct GeneratorConfig {
    GeneratorKind kind = GeneratorKind::Identity;
    /// Identity start point; empty means the origin.
    Vec theta;
    int width = 16;
    int height = 16;
    SplatInitSpec splat;
    /// Explicit splat scene; overrides the random initialization.
    std::optional<SplatScene> scene;
    RenderOptions render;

    std::unique_ptr<Generator> build(int dim) const;
};

struct GridConfig {
    std::vector<int> t_values{100, 200, 300, 400, 500, 600, 700, 800, 900};
    std::vector<int> delta_T_values{10, 25, 50, 100};
    std::vector<int> delta_S_values{50, 100, 200};
    int noise_draws = 32;
    std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
    int start_points = 20;
    int denoise_stride = 50;
};

struct RaceConfig {
    double threshold = 0.2;
    Objective first = Objective::Ism;
    Objective second = Objective::Sds;
};

struct GradcheckConfig {
    std::vector<std::string> checks{"score", "renderer", "sds_forms", "decomposition"};
    int score_cases = 100;
    int renderer_scenes = 20;
    int identity_cases = 50;
    double score_step = 1e-5;
    double render_step = 1e-4;
    double score_tolerance = 1e-5;
    double render_tolerance = 1e-4;
    double forms_tolerance = 1e-10;
    double decomposition_tolerance = 1e-9;
    double single_interval_tolerance = 1e-12;
};

struct ExperimentConfig {
    ScheduleConfig schedule;
    OracleConfig oracle;
    GeneratorConfig generator;
    /// Also carries the guidance spec shared by every experiment.
    DistillConfig distill;
    GridConfig grids;
    RaceConfig race;
    GradcheckConfig gradcheck;
    std::uint64_t seed = 0;
    /// Worker count for independent jobs; 0 uses the hardware concurrency.
    unsigned threads = 0;
};

/// Throws ConfigError naming the offending dotted key.
ExperimentConfig parse_config(const nlohmann::json& root);
ExperimentConfig load_config(const std::filesystem::path& path);

nlohmann::json scene_to_json(const SplatScene& scene);
SplatScene scene_from_json(const nlohmann::json& j);

} // namespace ismlab
