// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/config.hpp"
#include "ismlab/errors.hpp"
#include "ismlab/io.hpp"
#include "ismlab/rng.hpp"

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

using namespace ismlab;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json
minimal_config() {
    return json::parse(R"({
        "oracle": {
            "components": [{"weight": 0.5, "mean": [-1, 0], "sigma": 0.05},
                           {"weight": 0.5, "mean": [1, 0], "sigma": 0.05}],
            "labels": {"left": [0], "right": [1]}
        },
        "guidance": {"positive": "right", "scale": 7.5}
    })");
}

std::string
config_error(const json& j) {
    try {
        parse_config(j);
    } catch (const ConfigError& err) {
        return err.what();
    }
    return {};
}

fs::path
scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("ismlab_io_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST(Config, MinimalDefaults) {
    const auto cfg = parse_config(minimal_config());
    EXPECT_EQ(cfg.schedule.steps, 1000);
    EXPECT_EQ(cfg.oracle.components.size(), 2u);
    EXPECT_EQ(cfg.distill.guidance.positive, "right");
    EXPECT_EQ(cfg.distill.guidance.negative, kNullLabel);
    EXPECT_EQ(cfg.distill.objective, Objective::Ism);
    EXPECT_EQ(cfg.generator.kind, GeneratorKind::Identity);
}

TEST(Config, OverridesNestedKeys) {
    auto j = minimal_config();
    j["distill"] = json::parse(R"({"objective": "sds", "iterations": 7,
        "optimizer": {"step_size": 0.05}, "jitter": {"max_rotation": 0.2}})");
    j["schedule"] = json::parse(R"({"omega": "one_minus_alpha_bar"})");
    j["race"] = json::parse(R"({"threshold": 0.3, "first": "naive"})");
    const auto cfg = parse_config(j);
    EXPECT_EQ(cfg.distill.objective, Objective::Sds);
    EXPECT_EQ(cfg.distill.iterations, 7);
    EXPECT_EQ(cfg.distill.optimizer.step_size, 0.05);
    EXPECT_EQ(cfg.distill.jitter.max_rotation, 0.2);
    EXPECT_EQ(cfg.schedule.omega, OmegaKind::OneMinusAlphaBar);
    EXPECT_EQ(cfg.race.first, Objective::Naive);
    EXPECT_EQ(cfg.race.threshold, 0.3);
}

TEST(Config, UnknownKeysNameTheirPath) {
    auto j = minimal_config();
    j["distill"] = json::parse(R"({"optimizer": {"stepsize": 0.1}})");
    EXPECT_NE(config_error(j).find("distill.optimizer.stepsize"), std::string::npos);
    j = minimal_config();
    j["colour"] = 1;
    EXPECT_NE(config_error(j).find("colour"), std::string::npos);
}

TEST(Config, RejectsBadValues) {
    auto j = minimal_config();
    j["distill"]["iterations"] = "many";
    EXPECT_NE(config_error(j).find("distill.iterations"), std::string::npos);
    j = minimal_config();
    j["distill"]["objective"] = "sgd";
    EXPECT_FALSE(config_error(j).empty());
    j = minimal_config();
    j["schedule"]["beta_end"] = 2.0;
    EXPECT_FALSE(config_error(j).empty());
    j = minimal_config();
    j["oracle"]["components"][0]["weight"] = -1.0;
    EXPECT_FALSE(config_error(j).empty());
    j = minimal_config();
    j["oracle"]["dim"] = 3;
    EXPECT_FALSE(config_error(j).empty());
    j = minimal_config();
    j.erase("oracle");
    EXPECT_FALSE(config_error(j).empty());
    j = minimal_config();
    j["gradcheck"]["checks"] = {"score", "everything"};
    EXPECT_FALSE(config_error(j).empty());
    j = minimal_config();
    j["generator"]["kind"] = "voxel";
    EXPECT_FALSE(config_error(j).empty());
}

TEST(Config, ShippedConfigsLoad) {
    int count = 0;
    for (const auto& entry : fs::directory_iterator(fs::path(ISMLAB_SOURCE_DIR) / "configs")) {
        if (entry.path().extension() != ".json") continue;
        SCOPED_TRACE(entry.path().string());
        EXPECT_NO_THROW(load_config(entry.path()));
        ++count;
    }
    EXPECT_GE(count, 7);
    EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Config, SceneJsonRoundTrip) {
    SplatInitSpec spec;
    spec.count = 5;
    spec.channels = 3;
    const SplatScene scene = random_scene(spec, 16, 16);
    const SplatScene back = scene_from_json(scene_to_json(scene));
    EXPECT_EQ(flatten_parameters(back), flatten_parameters(scene));
    for (std::size_t i = 0; i < scene.splats.size(); ++i) {
        EXPECT_EQ(back.splats[i].depth, scene.splats[i].depth);
    }
}

TEST(Ppm, RoundTripQuantizes) {
    const fs::path dir = scratch_dir("ppm");
    Rng rng(2);
    for (int channels : {1, 3}) {
        Vec img(6 * 4 * channels);
        for (Eigen::Index i = 0; i < img.size(); ++i) img[i] = rng.uniform(-0.2, 1.2);
        const fs::path path = dir / ("img" + std::to_string(channels) + ".ppm");
        write_ppm(path, img, 6, 4, channels);
        int w = 0, h = 0, c = 0;
        const Vec back = read_ppm(path, w, h, c);
        EXPECT_EQ(w, 6);
        EXPECT_EQ(h, 4);
        EXPECT_EQ(c, channels);
        EXPECT_LE((back - img.cwiseMax(0.0).cwiseMin(1.0)).cwiseAbs().maxCoeff(), 0.5 / 255 + 1e-12);
    }
    EXPECT_THROW(write_ppm(dir / "bad.ppm", Vec::Zero(5), 2, 2, 1), DimensionError);
    fs::remove_all(dir);
}

TEST(Ppm, GridLayout) {
    const fs::path dir = scratch_dir("grid");
    const std::vector<std::vector<Vec>> tiles{{Vec::Ones(4), Vec::Ones(4)}, {Vec::Ones(4), Vec{}}};
    write_ppm_grid(dir / "grid.ppm", tiles, 2, 2, 1);
    int w = 0, h = 0, c = 0;
    const Vec back = read_ppm(dir / "grid.ppm", w, h, c);
    EXPECT_EQ(w, 5);
    EXPECT_EQ(h, 5);
    EXPECT_EQ(back[0], 1.0);
    EXPECT_EQ(back[2], 0.0);          // gutter column
    EXPECT_EQ(back[4 * 5 + 4], 0.0);  // blank cell
    fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
    const fs::path dir = scratch_dir("cli");
    auto j = minimal_config();
    j["gradcheck"] = json::parse(R"({"checks": ["sds_forms"], "identity_cases": 5})");
    std::ofstream(dir / "ok.json") << j.dump();
    j["gradcheck"]["forms_tolerance"] = 0.0;
    j["gradcheck"]["checks"] = {"renderer"};
    j["gradcheck"]["renderer_scenes"] = 2;
    j["gradcheck"]["render_tolerance"] = 0.0;
    std::ofstream(dir / "strict.json") << j.dump();
    j["unknown_key"] = true;
    std::ofstream(dir / "bad.json") << j.dump();

    const auto run = [&](const std::string& args) {
        const std::string cmd = std::string(ISMLAB_CLI_PATH) + " " + args + " >/dev/null 2>&1";
        const int status = std::system(cmd.c_str());
        return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    };
    const std::string out = " --out " + (dir / "out").string();
    EXPECT_EQ(run("gradcheck --config " + (dir / "ok.json").string() + out), 0);
    EXPECT_TRUE(fs::exists(dir / "out" / "gradcheck.csv"));
    EXPECT_EQ(run("gradcheck --config " + (dir / "strict.json").string() + out), 2);
    EXPECT_EQ(run("gradcheck --config " + (dir / "bad.json").string() + out), 1);
    EXPECT_EQ(run("teleport --config " + (dir / "ok.json").string() + out), 1);
    EXPECT_EQ(run("gradcheck --config " + (dir / "missing.json").string() + out), 1);
    fs::remove_all(dir);
}
