// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/generators.hpp"

#include "ismlab/errors.hpp"
#include "ismlab/rng.hpp"

#include <cmath>
#include <numbers>

namespace ismlab {

int
splat_parameter_count(int channels) {
    return 6 + channels;
}

Vec
flatten_parameters(const SplatScene& scene) {
    const int c = scene.channels();
    const int per = splat_parameter_count(c);
    Vec out(static_cast<Eigen::Index>(scene.splats.size()) * per + c);
    Eigen::Index k = 0;
    for (const auto& sp : scene.splats) {
        out.segment<2>(k) = sp.center;
        out.segment<2>(k + 2) = sp.log_scale;
        out[k + 4] = sp.rotation;
        out.segment(k + 5, c) = sp.color;
        out[k + 5 + c] = sp.logit_opacity;
        k += per;
    }
    out.tail(c) = scene.background;
    return out;
}

void
unflatten_parameters(SplatScene& scene, const Vec& params) {
    const int c = scene.channels();
    const int per = splat_parameter_count(c);
    if (params.size() != static_cast<Eigen::Index>(scene.splats.size()) * per + c) {
        throw DimensionError("parameter vector does not match the scene layout");
    }
    Eigen::Index k = 0;
    for (auto& sp : scene.splats) {
        sp.center = params.segment<2>(k);
        sp.log_scale = params.segment<2>(k + 2);
        sp.rotation = params[k + 4];
        sp.color = params.segment(k + 5, c);
        sp.logit_opacity = params[k + 5 + c];
        k += per;
    }
    scene.background = params.tail(c);
}

Vec
flatten_gradient(const SceneGradient& gradient) {
    const int c = static_cast<int>(gradient.background.size());
    const int per = splat_parameter_count(c);
    Vec out(static_cast<Eigen::Index>(gradient.splats.size()) * per + c);
    Eigen::Index k = 0;
    for (const auto& g : gradient.splats) {
        out.segment<2>(k) = g.center;
        out.segment<2>(k + 2) = g.log_scale;
        out[k + 4] = g.rotation;
        out.segment(k + 5, c) = g.color;
        out[k + 5 + c] = g.logit_opacity;
        k += per;
    }
    out.tail(c) = gradient.background;
    return out;
}

IdentityLatent::IdentityLatent(Vec theta) : theta_(std::move(theta)) {
    if (theta_.size() == 0) throw DimensionError("latent must be non-empty");
    if (!theta_.allFinite()) throw InputError("latent has non-finite entries");
}

Vec
IdentityLatent::pullback(const View&, const Vec& grad_image) const {
    if (grad_image.size() != theta_.size()) throw DimensionError("gradient size mismatch");
    return grad_image;
}

void
IdentityLatent::set_parameters(const Vec& theta) {
    if (theta.size() != theta_.size()) throw DimensionError("parameter size mismatch");
    theta_ = theta;
}

std::unique_ptr<Generator>
IdentityLatent::clone() const {
    return std::make_unique<IdentityLatent>(*this);
}

SplatGenerator::SplatGenerator(SplatScene scene, int width, int height, RenderOptions options)
    : scene_(std::move(scene)), width_(width), height_(height), options_(options) {
    scene_.validate();
    View::canonical(width_, height_).validate();
}

Vec
SplatGenerator::render(const View& view) const {
    if (view.width != width_ || view.height != height_) {
        throw DimensionError("view size differs from the generator's image size");
    }
    return ismlab::render(scene_, view, options_);
}

Vec
SplatGenerator::pullback(const View& view, const Vec& grad_image) const {
    if (view.width != width_ || view.height != height_) {
        throw DimensionError("view size differs from the generator's image size");
    }
    return flatten_gradient(render_backward(scene_, view, grad_image, options_));
}

void
SplatGenerator::set_parameters(const Vec& theta) {
    unflatten_parameters(scene_, theta);
}

void
SplatGenerator::project() {
    for (auto& sp : scene_.splats) sp.color = sp.color.cwiseMax(0.0).cwiseMin(1.0);
    scene_.background = scene_.background.cwiseMax(0.0).cwiseMin(1.0);
}

std::optional<std::array<int, 3>>
SplatGenerator::image_shape() const {
    return std::array<int, 3>{width_, height_, scene_.channels()};
}

std::unique_ptr<Generator>
SplatGenerator::clone() const {
    return std::make_unique<SplatGenerator>(*this);
}

SplatScene
random_scene(const SplatInitSpec& spec, int width, int height) {
    if (spec.count < 1) throw ConfigError("splat count must be >= 1");
    if (spec.channels != 1 && spec.channels != 3) throw ConfigError("channels must be 1 or 3");
    if (!(spec.scale > 0.0)) throw ConfigError("splat scale must be positive");
    if (width <= 0 || height <= 0) throw ConfigError("image size must be positive");
    if (!(spec.color_lo <= spec.color_hi)) throw ConfigError("color range is empty");
    if (2.0 * spec.margin >= width || 2.0 * spec.margin >= height) {
        throw ConfigError("margin leaves no room for splat centers");
    }

    Rng rng(spec.seed, 0x5C3E7E);
    SplatScene scene;
    scene.background = Eigen::VectorXd::Constant(spec.channels, spec.background);
    scene.splats.reserve(spec.count);
    for (int i = 0; i < spec.count; ++i) {
        Splat2D sp;
        sp.center = Eigen::Vector2d(rng.uniform(spec.margin, width - spec.margin),
                                    rng.uniform(spec.margin, height - spec.margin));
        sp.log_scale = Eigen::Vector2d::Constant(std::log(spec.scale));
        sp.rotation = rng.uniform(-std::numbers::pi, std::numbers::pi);
        sp.color = Eigen::VectorXd(spec.channels);
        for (int k = 0; k < spec.channels; ++k) sp.color[k] = rng.uniform(spec.color_lo, spec.color_hi);
        sp.logit_opacity = spec.logit_opacity;
        sp.depth = i;
        scene.splats.push_back(std::move(sp));
    }
    return scene;
}

} // namespace ismlab
