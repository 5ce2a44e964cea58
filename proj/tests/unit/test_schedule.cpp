// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "../support/fixtures.hpp"

#include "ismlab/errors.hpp"
#include "ismlab/schedule.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ismlab;

namespace {

NoiseSchedule
half_schedule(OmegaKind omega = OmegaKind::Unit) {
    return NoiseSchedule::linear(2, 0.5, 0.5, omega);
}

} // namespace

TEST(Schedule, TwoStepProduct) {
    const auto s = half_schedule();
    ASSERT_EQ(s.alpha_bars().size(), 3u);
    EXPECT_DOUBLE_EQ(s.alpha_bar(0), 1.0);
    EXPECT_DOUBLE_EQ(s.alpha_bar(1), 0.5);
    EXPECT_DOUBLE_EQ(s.alpha_bar(2), 0.25);
}

TEST(Schedule, CleanBoundaryIsOne) {
    EXPECT_EQ(fixtures::default_schedule().alpha_bar(0), 1.0);
    EXPECT_EQ(NoiseSchedule::linear(7, 0.1, 0.3).alpha_bar(0), 1.0);
}

TEST(Schedule, MatchesExtendedPrecisionProduct) {
    const auto s = fixtures::default_schedule();
    const auto expected = ref::alpha_bars(1000, 0.00085L, 0.012L);
    for (int t = 0; t <= 1000; ++t) {
        EXPECT_NEAR(s.alpha_bar(t) / double(expected[t]), 1.0, 1e-12) << "t=" << t;
    }
}

TEST(Schedule, BetaRampEndpoints) {
    const auto s = NoiseSchedule::linear(10, 0.1, 0.2);
    EXPECT_DOUBLE_EQ(s.beta(1), 0.1);
    EXPECT_DOUBLE_EQ(s.beta(10), 0.2);
    EXPECT_NEAR(s.beta(4), 0.1 + 0.1 * 3.0 / 9.0, 1e-15);
}

TEST(Schedule, RebuildFromBetas) {
    const auto s = fixtures::default_schedule();
    double ab = 1.0;
    for (int t = 1; t <= s.steps(); ++t) {
        ab *= 1.0 - s.betas()[t];
        EXPECT_NEAR(ab / s.alpha_bar(t), 1.0, 1e-12);
    }
}

TEST(Schedule, GammaExamples) {
    const auto s = half_schedule();
    EXPECT_NEAR(s.gamma(2), std::sqrt(3.0), 1e-12);
    EXPECT_NEAR(s.gamma(1), 1.0, 1e-15);
    EXPECT_EQ(s.gamma(0), 0.0);
}

TEST(Schedule, OmegaExamples) {
    const auto unit = fixtures::default_schedule();
    for (int t : {1, 10, 500, 1000}) EXPECT_EQ(unit.omega(t), 1.0);
    const auto weighted = half_schedule(OmegaKind::OneMinusAlphaBar);
    EXPECT_DOUBLE_EQ(weighted.omega(2), 0.75);
    EXPECT_DOUBLE_EQ(weighted.omega(1), 0.5);
}

TEST(Schedule, Monotonicity) {
    const auto s = fixtures::default_schedule();
    for (int t = 1; t < s.steps(); ++t) {
        EXPECT_GT(s.alpha_bar(t), s.alpha_bar(t + 1));
        EXPECT_LT(s.gamma(t), s.gamma(t + 1));
    }
    EXPECT_GT(s.alpha_bar(s.steps()), 0.0);
}

TEST(Schedule, DerivedQuantitiesConsistent) {
    const auto s = fixtures::default_schedule();
    for (int t = 0; t <= s.steps(); t += 37) {
        EXPECT_NEAR(s.sqrt_alpha_bar(t) * s.sqrt_alpha_bar(t), s.alpha_bar(t), 1e-15);
        EXPECT_NEAR(s.sqrt_one_minus_alpha_bar(t) * s.sqrt_one_minus_alpha_bar(t),
                    1.0 - s.alpha_bar(t), 1e-15);
    }
}

TEST(Schedule, InvalidParameters) {
    EXPECT_THROW(NoiseSchedule::linear(1, 0.1, 0.2), ConfigError);
    EXPECT_THROW(NoiseSchedule::linear(10, 0.0, 0.2), ConfigError);
    EXPECT_THROW(NoiseSchedule::linear(10, 0.3, 0.2), ConfigError);
    EXPECT_THROW(NoiseSchedule::linear(10, 0.1, 1.0), ConfigError);
    EXPECT_THROW(NoiseSchedule::linear(10, std::nan(""), 0.2), ConfigError);
}

TEST(Schedule, IndexErrors) {
    const auto s = half_schedule();
    EXPECT_THROW(s.alpha_bar(3), IndexError);
    EXPECT_THROW(s.alpha_bar(-1), IndexError);
    EXPECT_THROW(s.gamma(3), IndexError);
    EXPECT_THROW(s.omega(0), IndexError);
    EXPECT_THROW(s.omega(3), IndexError);
}

TEST(Schedule, OmegaNames) {
    EXPECT_EQ(omega_kind_from_string("unit"), OmegaKind::Unit);
    EXPECT_EQ(omega_kind_from_string(to_string(OmegaKind::OneMinusAlphaBar)),
              OmegaKind::OneMinusAlphaBar);
    EXPECT_THROW(omega_kind_from_string("snr"), ConfigError);
}
