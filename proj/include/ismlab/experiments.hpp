// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ismlab/config.hpp"
#include "ismlab/distill.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace ismlab {

// Every runner writes its outputs under `out` (report.json, CSV files and
// frames/*.ppm) unless `out` is empty. Variances are total variances: the
// sum over coordinates of the unbiased per-coordinate sample variance.

/// Deterministic multi-step clean estimate: unconditional inversion of x0 to
/// t at `stride`, then guided denoising back along the same grid.
Vec multi_step_pseudo_gt(const MixtureOracle& oracle, const NoiseSchedule& schedule,
                         const Vec& x0, int t, int stride, const GuidanceSpec& guidance);

/// One draw from the label-restricted mixture.
Vec sample_mixture(const MixtureOracle& oracle, const Label& label, Rng& rng);

/// Total variance of a sample set; zero for fewer than two samples.
double total_variance(const std::vector<Vec>& samples);

struct ConsistencyRow {
    int t = 0;
    double sds_variance = 0.0; ///< across noise draws
    double ism_variance = 0.0; ///< across repeated evaluations
    double sds_mean_distance = 0.0;
    double ism_distance = 0.0;
};

struct ConsistencyReport {
    std::vector<ConsistencyRow> rows;
    double sds_across_t_variance = 0.0;
    double ism_across_t_variance = 0.0;
    /// Distance of the mean of all pseudo-GTs to the nearest conditional
    /// mode, and the mean of the individual distances.
    double sds_averaged_distance = 0.0;
    double sds_mean_of_distances = 0.0;
    double ism_averaged_distance = 0.0;
    double ism_mean_of_distances = 0.0;
};

ConsistencyReport run_consistency(const ExperimentConfig& config,
                                  const std::filesystem::path& out = {});

struct QualityRow {
    int t = 0;
    double err_single = 0.0;
    double err_multi = 0.0;
    double oracle_calls_multi = 0.0; ///< per start point
};

std::vector<QualityRow> run_quality(const ExperimentConfig& config,
                                    const std::filesystem::path& out = {});

struct EtaRow {
    int t = 0;
    int delta_T = 0;
    int point = 0;
    double eta_norm = 0.0;
    double interval_norm = 0.0; ///< |gamma(t) * interval score|
    double ratio = 0.0;
    double decomposition_residual = 0.0;
    double series_disagreement = 0.0;
    std::uint64_t naive_calls = 0;
    /// ISM calls at the first configured delta_S; absent when delta_T = t.
    std::optional<std::uint64_t> ism_calls;
};

struct EtaReport {
    std::vector<EtaRow> rows;
    double max_decomposition_residual = 0.0;
    /// Largest |eta| among delta_T = t rows.
    double max_single_interval_eta = 0.0;
    bool passed = true;
};

EtaReport run_eta_sweep(const ExperimentConfig& config, const std::filesystem::path& out = {});

struct SweepCell {
    int delta_T = 0;
    int delta_S = 0;
    double final_distance = 0.0;
    std::uint64_t total_oracle_calls = 0;
    double wall_time = 0.0;
    RunLog log;
};

std::vector<SweepCell> run_interval_sweep(const ExperimentConfig& config,
                                          const std::filesystem::path& out = {});

/// First iteration count after which the distance is <= threshold; 0 when
/// the start already is. Absent if the run never crosses.
std::optional<int> first_crossing(const RunLog& log, double threshold);

struct RacePair {
    std::uint64_t seed = 0;
    RunLog first;
    RunLog second;
    std::optional<int> first_crossing;
    std::optional<int> second_crossing;
};

struct RaceReport {
    Objective first = Objective::Ism;
    Objective second = Objective::Sds;
    double threshold = 0.0;
    std::vector<RacePair> pairs;
    /// Never-crossing runs count as +infinity.
    double first_median_crossing = 0.0;
    double second_median_crossing = 0.0;
};

RaceReport run_race(const ExperimentConfig& config, const std::filesystem::path& out = {});

struct GradcheckRow {
    std::string name;
    int cases = 0;
    double max_error = 0.0;
    double tolerance = 0.0;
    bool passed = true;
};

struct GradcheckReport {
    std::vector<GradcheckRow> rows;
    bool passed() const;
};

struct GradcheckHooks {
    /// Applied to each flattened analytic renderer gradient before comparison.
    std::function<void(Vec& analytic)> renderer_fault;
};

GradcheckReport run_gradcheck(const ExperimentConfig& config,
                              const std::filesystem::path& out = {},
                              const GradcheckHooks& hooks = {});

/// Single distillation run from the config, writing metrics.csv and frames.
RunLog run_distill(const ExperimentConfig& config, const std::filesystem::path& out = {});

/// Dispatches on the CLI kind name. Returns 0 on success and 2 when a
/// built-in check fails; throws ConfigError for unknown kinds.
int run_named_experiment(std::string_view kind, const ExperimentConfig& config,
                         const std::filesystem::path& out);

} // namespace ismlab
