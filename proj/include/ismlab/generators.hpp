// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "ismlab/oracle.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace ismlab {

/// Affine camera: image = affine.leftCols<2>() * scene + affine.col(2).
struct View {
    Eigen::Matrix<double, 2, 3> affine = Eigen::Matrix<double, 2, 3>::Identity();
    int width = 16;
    int height = 16;

    /// Identity affine: scene units are pixel units.
    static View canonical(int width, int height);

    /// Throws ConfigError for non-positive sizes or a singular 2x2 block.
    void validate() const;
    bool operator==(const View&) const = default;
};

/// Camera-pose randomness. Rotation and zoom act about the image center;
/// translation is in pixels.
struct ViewJitterSpec {
    double max_rotation = 0.0;
    double zoom_min = 1.0;
    double zoom_max = 1.0;
    double max_translation = 0.0;

    void validate() const;
};

/// Deterministic function of (seed, jitter); zero jitter gives the canonical
/// view.
View sample_view(std::uint64_t seed, const ViewJitterSpec& jitter, int width, int height);

struct Splat2D {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    Eigen::Vector2d log_scale = Eigen::Vector2d::Zero();
    double rotation = 0.0;
    Eigen::VectorXd color = Eigen::VectorXd::Ones(1);
    double logit_opacity = 0.0;
    double depth = 0.0;

    double opacity() const;
    Eigen::Vector2d scale() const { return log_scale.array().exp(); }
};

struct SplatScene {
    std::vector<Splat2D> splats;
    Eigen::VectorXd background = Eigen::VectorXd::Zero(1);

    int channels() const { return static_cast<int>(background.size()); }
    void validate() const;
    /// Composite order: ascending depth, ties by index.
    std::vector<std::size_t> draw_order() const;
};

struct RenderOptions {
    /// Footprints are cut at this Mahalanobis radius.
    double truncation_sigmas = 6.0;
};

/// Row-major, channel-minor image of width * height * channels values.
Vec render(const SplatScene& scene, const View& view, const RenderOptions& options = {});

struct SplatGradient {
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    Eigen::Vector2d log_scale = Eigen::Vector2d::Zero();
    double rotation = 0.0;
    Eigen::VectorXd color;
    double logit_opacity = 0.0;
};

struct SceneGradient {
    std::vector<SplatGradient> splats;
    Eigen::VectorXd background;
};

/// Exact gradient of <grad_image, render(scene, view)> with respect to every
/// differentiable scene parameter (depth is a sort key and gets none).
SceneGradient render_backward(const SplatScene& scene, const View& view, const Vec& grad_image,
                              const RenderOptions& options = {});

/// Flat parameter layout per splat: center(2), log_scale(2), rotation,
/// color(C), logit_opacity; then background(C).
int splat_parameter_count(int channels);
Vec flatten_parameters(const SplatScene& scene);
void unflatten_parameters(SplatScene& scene, const Vec& params);
Vec flatten_gradient(const SceneGradient& gradient);

/// A differentiable parametric model theta with render map g(theta, view).
class Generator {
public:
    virtual ~Generator() = default;

    virtual int image_dim() const = 0;
    virtual Vec render(const View& view) const = 0;
    /// d<grad_image, g(theta, view)> / d theta.
    virtual Vec pullback(const View& view, const Vec& grad_image) const = 0;

    virtual Vec parameters() const = 0;
    virtual void set_parameters(const Vec& theta) = 0;
    /// Projects parameters back onto their feasible set after an update.
    virtual void project() {}

    /// (width, height, channels) when renders are images.
    virtual std::optional<std::array<int, 3>> image_shape() const { return std::nullopt; }
    virtual View canonical_view() const = 0;

    virtual std::unique_ptr<Generator> clone() const = 0;
};

/// g(theta, view) = theta: the rendered view is the optimization variable.
class IdentityLatent final : public Generator {
public:
    explicit IdentityLatent(Vec theta);

    int image_dim() const override { return static_cast<int>(theta_.size()); }
    Vec render(const View&) const override { return theta_; }
    Vec pullback(const View&, const Vec& grad_image) const override;
    Vec parameters() const override { return theta_; }
    void set_parameters(const Vec& theta) override;
    View canonical_view() const override { return View{}; }
    std::unique_ptr<Generator> clone() const override;

    const Vec& theta() const { return theta_; }

private:
    Vec theta_;
};

class SplatGenerator final : public Generator {
public:
    SplatGenerator(SplatScene scene, int width, int height, RenderOptions options = {});

    int image_dim() const override { return width_ * height_ * scene_.channels(); }
    Vec render(const View& view) const override;
    Vec pullback(const View& view, const Vec& grad_image) const override;
    Vec parameters() const override { return flatten_parameters(scene_); }
    void set_parameters(const Vec& theta) override;
    /// Clamps colors and background to [0, 1].
    void project() override;
    std::optional<std::array<int, 3>> image_shape() const override;
    View canonical_view() const override { return View::canonical(width_, height_); }
    std::unique_ptr<Generator> clone() const override;

    const SplatScene& scene() const { return scene_; }

private:
    SplatScene scene_;
    int width_;
    int height_;
    RenderOptions options_;
};

/// Random initial scene: centers uniform over the image (inset by `margin`
/// pixels), isotropic scale, random rotation, colors uniform in
/// [color_lo, color_hi], constant opacity logit, depth = index.
struct SplatInitSpec {
    int count = 32;
    int channels = 1;
    std::uint64_t seed = 0;
    double margin = 1.5;
    double scale = 1.0;
    double color_lo = 0.4;
    double color_hi = 0.6;
    double logit_opacity = -1.0;
    double background = 0.1;
};
SplatScene random_scene(const SplatInitSpec& spec, int width, int height);

} // namespace ismlab
