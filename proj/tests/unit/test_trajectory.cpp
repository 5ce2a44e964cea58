// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "../support/fixtures.hpp"

#include "ismlab/errors.hpp"
#include "ismlab/rng.hpp"
#include "ismlab/trajectory.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace ismlab;
using fixtures::vec2;

namespace {

const GuidanceSpec kUnconditional{kNullLabel, kNullLabel, 1.0};

NoiseSchedule
half_schedule() {
    return NoiseSchedule::linear(2, 0.5, 0.5);
}

double
round_trip_error(const MixtureOracle& o, const NoiseSchedule& s, const Vec& x0, int t, int stride) {
    const auto traj = ddim_invert(o, s, x0, t, stride);
    return (ddim_denoise(o, s, traj.final_latent(), t, stride, kUnconditional) - x0).norm();
}

} // namespace

TEST(Trajectory, AddNoiseExamples) {
    const auto s = half_schedule();
    const Vec a = add_noise(s, vec2(1, 0), 2, vec2(0, 2));
    EXPECT_NEAR(a[0], 0.5, 1e-15);
    EXPECT_NEAR(a[1], 1.7320508075688772, 1e-12);
    EXPECT_EQ(add_noise(s, vec2(3, -1), 2, Vec::Zero(2)), s.sqrt_alpha_bar(2) * vec2(3, -1));
    const Vec c = add_noise(s, vec2(0, 0), 1, vec2(1, 0));
    EXPECT_NEAR(c[0], 0.70710678118654752, 1e-12);
    EXPECT_EQ(c[1], 0.0);
}

TEST(Trajectory, PseudoGtSingleExamples) {
    const auto s = half_schedule();
    const Vec x = pseudo_gt_single(s, vec2(0.5, 1.7320508075688772), 2, vec2(0, 2));
    EXPECT_NEAR(x[0], 1.0, 1e-12);
    EXPECT_NEAR(x[1], 0.0, 1e-12);
    const Vec y = pseudo_gt_single(s, vec2(1, 2), 2, Vec::Zero(2));
    EXPECT_NEAR(y[0], 2.0, 1e-15);
    EXPECT_NEAR(y[1], 4.0, 1e-15);
}

TEST(Trajectory, AddNoiseRoundTripProperty) {
    const auto s = fixtures::default_schedule();
    Rng rng(11);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Vec x0 = rng.normal_vector(3);
        const Vec eps = rng.normal_vector(3);
        const int t = rng.uniform_int(1, 1000);
        const Vec back = pseudo_gt_single(s, add_noise(s, x0, t, eps), t, eps);
        worst = std::max(worst, (back - x0).cwiseAbs().maxCoeff());
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(Trajectory, TimestepErrors) {
    const auto s = half_schedule();
    EXPECT_THROW(add_noise(s, vec2(0, 0), 0, vec2(0, 0)), IndexError);
    EXPECT_THROW(add_noise(s, vec2(0, 0), 3, vec2(0, 0)), IndexError);
    EXPECT_THROW(pseudo_gt_single(s, vec2(0, 0), 0, vec2(0, 0)), IndexError);
    EXPECT_THROW(add_noise(s, vec2(0, 0), 1, Vec::Zero(3)), DimensionError);
}

TEST(Trajectory, StrideGrids) {
    EXPECT_EQ(stride_grid(600, 200), (std::vector<int>{0, 200, 400, 600}));
    EXPECT_EQ(stride_grid(550, 200), (std::vector<int>{0, 200, 400, 550}));
    EXPECT_EQ(stride_grid(7, 7), (std::vector<int>{0, 7}));
    EXPECT_EQ(interval_grid(600, 50, 200), (std::vector<int>{0, 200, 400, 550, 600}));
    EXPECT_EQ(interval_grid(600, 600, 50), (std::vector<int>{0, 600}));
    EXPECT_THROW(stride_grid(10, 0), ConfigError);
    EXPECT_THROW(interval_grid(10, 11, 1), ConfigError);
    EXPECT_THROW(interval_grid(10, 0, 1), ConfigError);
}

TEST(Trajectory, InvertSingleHopFromClean) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    const Vec x0 = vec2(0.4, -0.9);
    const auto traj = ddim_invert(o, s, x0, 300, 300);
    ASSERT_EQ(traj.timesteps, (std::vector<int>{0, 300}));
    EXPECT_EQ(traj.eps_cache.front(), Vec::Zero(2));
    EXPECT_LT((traj.final_latent() - s.sqrt_alpha_bar(300) * x0).norm(), 1e-15);
}

TEST(Trajectory, InvertStaysOnDegenerateMode) {
    const auto s = fixtures::default_schedule();
    const Vec mu = vec2(0.7, -0.3);
    const auto o = fixtures::single(mu);
    const auto traj = ddim_invert(o, s, mu, 900, 100);
    for (std::size_t i = 0; i < traj.latents.size(); ++i) {
        EXPECT_LT((traj.latents[i] - s.sqrt_alpha_bar(traj.timesteps[i]) * mu).norm(), 1e-6);
    }
}

TEST(Trajectory, InvertShapeAndCacheInvariants) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    const auto traj = ddim_invert(o, s, vec2(0.3, -0.2), 550, 200);
    EXPECT_EQ(traj.timesteps, (std::vector<int>{0, 200, 400, 550}));
    EXPECT_EQ(traj.latents.size(), traj.eps_cache.size() + 1);
    EXPECT_EQ(traj.hops(), 3u);
    for (std::size_t i = 0; i < traj.eps_cache.size(); ++i) {
        EXPECT_EQ(traj.eps_cache[i], o.eps_predict(s, traj.latents[i], traj.timesteps[i], kNullLabel));
    }
    EXPECT_EQ(traj.replay_error(s), 0.0);
}

TEST(Trajectory, ReplayDetectsCorruption) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    auto traj = ddim_invert(o, s, vec2(0.3, -0.2), 400, 100);
    traj.latents[2][0] += 1e-6;
    EXPECT_GT(traj.replay_error(s), 1e-7);
    traj.eps_cache.pop_back();
    EXPECT_TRUE(std::isinf(traj.replay_error(s)));
}

TEST(Trajectory, InvertFineStrideConvergence) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    Rng rng(21);
    const Vec x0 = rng.normal_vector(2);
    const Vec fine = ddim_invert(o, s, x0, 600, 1).final_latent();
    const Vec coarse = ddim_invert(o, s, x0, 600, 200).final_latent();
    const Vec medium = ddim_invert(o, s, x0, 600, 25).final_latent();
    EXPECT_GT((coarse - medium).norm(), 0.0);
    EXPECT_LT((medium - fine).norm(), (coarse - fine).norm());
}

TEST(Trajectory, InvertErrors) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    EXPECT_THROW(ddim_invert(o, s, vec2(0, 0), 100, 0), ConfigError);
    EXPECT_THROW(ddim_invert(o, s, vec2(0, 0), 100, 101), ConfigError);
    EXPECT_THROW(ddim_invert(o, s, vec2(0, 0), 0, 1), ConfigError);
    EXPECT_THROW(ddim_invert(o, s, vec2(0, 0), 1001, 10), ConfigError);
    const std::vector<int> bad{0, 10, 10};
    EXPECT_THROW(ddim_invert_along(o, s, vec2(0, 0), bad), ConfigError);
    EXPECT_THROW(ddim_invert(o, s, vec2(0, 0), 100, 10, "missing"), LabelError);
}

TEST(Trajectory, InvertCountsOneRequestPerHop) {
    const auto s = fixtures::default_schedule();
    auto o = fixtures::three_component();
    o.reset_request_count();
    ddim_invert(o, s, vec2(0.1, 0.1), 600, 200);
    EXPECT_EQ(o.request_count(), 3u);
}

TEST(Trajectory, DenoiseFixedPoint) {
    const auto s = fixtures::default_schedule();
    const Vec mu = vec2(-0.4, 1.1);
    const auto o = fixtures::single(mu);
    for (int t : {50, 400, 999}) {
        const Vec out = ddim_denoise(o, s, s.sqrt_alpha_bar(t) * mu, t, 37, {"only", kNullLabel, 7.5});
        EXPECT_LT((out - mu).norm(), 1e-6) << "t=" << t;
    }
}

TEST(Trajectory, DenoiseOneHopIsSingleStepEstimate) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    const GuidanceSpec g{"first", kNullLabel, 7.5};
    const Vec xt = vec2(0.8, -0.6);
    const Vec expected = pseudo_gt_single(s, xt, 700, o.eps_guided(s, xt, 700, g));
    EXPECT_LT((ddim_denoise(o, s, xt, 700, 700, g) - expected).norm(), 1e-12);
}

TEST(Trajectory, DenoiseFirstOrderAgainstFineStride) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    const Vec xt = ddim_invert(o, s, vec2(0.5, 0.2), 600, 50).final_latent();
    const Vec fine = ddim_denoise(o, s, xt, 600, 1, kUnconditional);
    const double e50 = (ddim_denoise(o, s, xt, 600, 50, kUnconditional) - fine).norm();
    const double e25 = (ddim_denoise(o, s, xt, 600, 25, kUnconditional) - fine).norm();
    EXPECT_GT(e50 / e25, 1.4);
    EXPECT_LT(e50 / e25, 2.6);
}

TEST(Trajectory, DenoiseErrors) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    EXPECT_THROW(ddim_denoise(o, s, vec2(0, 0), 100, 0, kUnconditional), ConfigError);
    EXPECT_THROW(ddim_denoise(o, s, vec2(0, 0), 100, 101, kUnconditional), ConfigError);
    const std::vector<int> increasing{0, 10};
    EXPECT_THROW(ddim_denoise_along(o, s, vec2(0, 0), increasing, kUnconditional), ConfigError);
}

TEST(Trajectory, DenoiseVisitsAndHops) {
    const auto s = fixtures::default_schedule();
    auto o = fixtures::three_component();
    const std::vector<int> grid{600, 550, 400, 0};
    std::vector<DenoiseVisit> visits;
    o.reset_request_count();
    ddim_denoise_along(o, s, vec2(0.2, 0.3), grid, kUnconditional, &visits);
    ASSERT_EQ(visits.size(), 3u);
    EXPECT_EQ(visits[0].t, 600);
    EXPECT_EQ(visits[2].t, 400);
    EXPECT_EQ(o.request_count(), 3u);
    EXPECT_EQ(denoise_hops(600, 50), 12);
    EXPECT_EQ(denoise_hops(610, 50), 13);
}

TEST(Trajectory, DegenerateRoundTripOneHop) {
    const auto s = fixtures::default_schedule();
    const Vec mu = vec2(0.7, -0.3);
    const auto o = fixtures::single(mu);
    const Vec start = add_noise(s, mu, 50, vec2(0.3, 0.8));
    const std::vector<int> up{50, 500}, down{500, 50};
    const auto traj = ddim_invert_along(o, s, start, up);
    const Vec back = ddim_denoise_along(o, s, traj.final_latent(), down, kUnconditional);
    EXPECT_LT((back - start).norm(), 1e-6);
}

TEST(Trajectory, MixtureRoundTripIsFirstOrder) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    const Vec x0 = vec2(0.3, -0.2);
    const double e100 = round_trip_error(o, s, x0, 600, 100);
    const double e50 = round_trip_error(o, s, x0, 600, 50);
    const double e25 = round_trip_error(o, s, x0, 600, 25);
    EXPECT_GT(e100, e50);
    EXPECT_GT(e50, e25);
    for (double ratio : {e100 / e50, e50 / e25}) {
        EXPECT_GE(ratio, 1.4);
        EXPECT_LE(ratio, 2.6);
    }
}

TEST(Trajectory, PureFunctionsAreBitwiseRepeatable) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    const Vec x0 = vec2(-0.3, 0.45);
    const auto a = ddim_invert(o, s, x0, 777, 33);
    const auto b = ddim_invert(o, s, x0, 777, 33);
    EXPECT_EQ(a.latents, b.latents);
    const GuidanceSpec g{"rest", kNullLabel, 7.5};
    EXPECT_EQ(ddim_denoise(o, s, a.final_latent(), 777, 33, g),
              ddim_denoise(o, s, b.final_latent(), 777, 33, g));
}

TEST(Trajectory, CsvDump) {
    const auto s = fixtures::default_schedule();
    const auto o = fixtures::three_component();
    std::ostringstream out;
    write_trajectory_csv(out, ddim_invert(o, s, vec2(1, 2), 20, 10));
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "step_index,t,x0,x1");
    std::getline(in, line);
    EXPECT_EQ(line, "0,0,1,2");
    int rows = 1;
    while (std::getline(in, line)) ++rows;
    EXPECT_EQ(rows, 3);
}
