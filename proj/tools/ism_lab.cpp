// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

// ism-lab <kind> --config <path.json> --out <dir>

#include "ismlab/config.hpp"
#include "ismlab/errors.hpp"
#include "ismlab/experiments.hpp"

#include "CLI11.hpp"

#include <iostream>

int
main(int argc, char** argv) {
    CLI::App app{"Score-distillation experiments on closed-form mixture priors"};
    std::string kind;
    std::string config_path;
    std::string out_dir;
    app.add_option("kind", kind, "Experiment kind")
        ->required()
        ->check(CLI::IsMember({"consistency", "quality", "eta-sweep", "interval-sweep", "race",
                               "gradcheck", "distill"}));
    app.add_option("--config", config_path, "Experiment config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : 1;
    }

    try {
        const ismlab::ExperimentConfig config = ismlab::load_config(config_path);
        const int code = ismlab::run_named_experiment(kind, config, out_dir);
        if (code == 2) std::cerr << "ism-lab: " << kind << " check failed, see " << out_dir << "\n";
        return code;
    } catch (const std::invalid_argument& err) {
        std::cerr << "ism-lab: configuration error: " << err.what() << "\n";
        return 1;
    } catch (const std::exception& err) {
        std::cerr << "ism-lab: " << err.what() << "\n";
        return 1;
    }
}
