// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "reference.hpp"

#include "ismlab/oracle.hpp"
#include "ismlab/schedule.hpp"

#include <vector>

namespace fixtures {

using ismlab::MixtureComponent;
using ismlab::MixtureOracle;
using ismlab::NoiseSchedule;
using ismlab::Vec;

inline NoiseSchedule
default_schedule(ismlab::OmegaKind omega = ismlab::OmegaKind::Unit) {
    return NoiseSchedule::linear(1000, 0.00085, 0.012, omega);
}

inline Vec
vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

/// Three broad components in 2D with a one-member and a two-member label.
inline MixtureOracle
three_component() {
    return MixtureOracle({{0.3, vec2(-1.0, 0.0), 0.5},
                          {0.3, vec2(1.0, 0.5), 0.5},
                          {0.4, vec2(0.0, -1.0), 0.5}},
                         {{"first", {0}}, {"rest", {1, 2}}});
}

/// Modes at (+-1, 0) with sigma 0.05.
inline MixtureOracle
two_mode(double sigma = 0.05) {
    return MixtureOracle({{0.5, vec2(-1.0, 0.0), sigma}, {0.5, vec2(1.0, 0.0), sigma}},
                         {{"left", {0}}, {"right", {1}}});
}

/// Three tight, well separated modes.
inline MixtureOracle
three_mode() {
    return MixtureOracle({{1.0, vec2(-1.0, 0.0), 0.05},
                          {1.0, vec2(1.0, 0.0), 0.05},
                          {1.0, vec2(0.0, 1.5), 0.05}},
                         {{"a", {0}}, {"b", {1}}, {"c", {2}}});
}

inline MixtureOracle
single(const Vec& mean, double sigma = MixtureOracle::kSigmaMin) {
    return MixtureOracle({{1.0, mean, sigma}}, {{"only", {0}}});
}

inline std::vector<ref::real>
to_ref(const Vec& v) {
    return std::vector<ref::real>(v.data(), v.data() + v.size());
}

inline Vec
from_ref(const std::vector<ref::real>& v) {
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = double(v[i]);
    return out;
}

/// Label-restricted components as reference Gaussians.
inline std::vector<ref::Gaussian>
to_ref(const MixtureOracle& oracle, const ismlab::Label& label) {
    std::vector<ref::Gaussian> out;
    for (std::size_t k : oracle.label_components(label)) {
        const auto& c = oracle.components()[k];
        out.push_back({c.weight, to_ref(c.mean), c.sigma});
    }
    return out;
}

} // namespace fixtures
