// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

#include "ismlab/errors.hpp"
#include "ismlab/generators.hpp"
#include "ismlab/rng.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ismlab {

View
View::canonical(int width, int height) {
    View view;
    view.width = width;
    view.height = height;
    return view;
}

void
View::validate() const {
    if (width <= 0 || height <= 0) throw ConfigError("view size must be positive");
    if (!affine.allFinite()) throw ConfigError("view affine has non-finite entries");
    const double det = affine(0, 0) * affine(1, 1) - affine(0, 1) * affine(1, 0);
    if (det == 0.0 || !std::isfinite(1.0 / det)) throw ConfigError("view affine is singular");
}

void
ViewJitterSpec::validate() const {
    if (!(max_rotation >= 0.0) || !(max_translation >= 0.0)) {
        throw ConfigError("jitter ranges must be non-negative");
    }
    if (!(zoom_min > 0.0) || !(zoom_min <= zoom_max) || !std::isfinite(zoom_max)) {
        throw ConfigError("zoom range must satisfy 0 < zoom_min <= zoom_max");
    }
    if (!std::isfinite(max_rotation) || !std::isfinite(max_translation)) {
        throw ConfigError("jitter ranges must be finite");
    }
}

View
sample_view(std::uint64_t seed, const ViewJitterSpec& jitter, int width, int height) {
    jitter.validate();
    View view = View::canonical(width, height);
    view.validate();
    if (jitter.max_rotation == 0.0 && jitter.max_translation == 0.0 && jitter.zoom_min == 1.0 &&
        jitter.zoom_max == 1.0) {
        return view;
    }
    Rng rng(seed, 0x5EED71E3ULL);
    const double angle = rng.uniform(-jitter.max_rotation, jitter.max_rotation);
    const double zoom = jitter.zoom_min == jitter.zoom_max
                            ? jitter.zoom_min
                            : rng.uniform(jitter.zoom_min, jitter.zoom_max);
    const Eigen::Vector2d shift(rng.uniform(-jitter.max_translation, jitter.max_translation),
                                rng.uniform(-jitter.max_translation, jitter.max_translation));

    Eigen::Matrix2d linear;
    linear << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    linear *= zoom;
    const Eigen::Vector2d pivot(0.5 * width, 0.5 * height);
    view.affine.leftCols<2>() = linear;
    view.affine.col(2) = pivot - linear * pivot + shift;
    return view;
}

double
Splat2D::opacity() const {
    if (logit_opacity >= 0.0) return 1.0 / (1.0 + std::exp(-logit_opacity));
    const double e = std::exp(logit_opacity);
    return e / (1.0 + e);
}

void
SplatScene::validate() const {
    if (splats.empty()) throw ConfigError("scene has no splats");
    const int c = channels();
    if (c != 1 && c != 3) throw ConfigError("scene must have 1 or 3 channels");
    if (!background.allFinite()) throw InputError("background has non-finite entries");
    for (const auto& sp : splats) {
        if (sp.color.size() != c) throw DimensionError("splat color size differs from background");
        if (!sp.center.allFinite() || !sp.log_scale.allFinite() || !sp.color.allFinite() ||
            !std::isfinite(sp.rotation) || !std::isfinite(sp.logit_opacity) ||
            !std::isfinite(sp.depth)) {
            throw InputError("splat has non-finite parameters");
        }
    }
}

std::vector<std::size_t>
SplatScene::draw_order() const {
    std::vector<std::size_t> order(splats.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return splats[a].depth < splats[b].depth;
    });
    return order;
}

namespace {

// Per-splat quantities that do not depend on the pixel.
struct Prepared {
    std::size_t index;
    Eigen::Vector2d center;
    Eigen::Vector2d scale;
    double cos_r;
    double sin_r;
    double opacity;
};

struct Footprint {
    Eigen::Vector2d r; // rotated offset
    Eigen::Vector2d u; // whitened offset
    double alpha;
};

class Rasterizer {
public:
    Rasterizer(const SplatScene& scene, const View& view, const RenderOptions& options)
        : scene_(scene), view_(view) {
        scene.validate();
        view.validate();
        if (!(options.truncation_sigmas > 0.0)) {
            throw ConfigError("truncation radius must be positive");
        }
        cutoff_ = options.truncation_sigmas * options.truncation_sigmas;
        inverse_ = view.affine.leftCols<2>().inverse();
        offset_ = view.affine.col(2);
        for (std::size_t idx : scene.draw_order()) {
            const Splat2D& sp = scene.splats[idx];
            prepared_.push_back({idx, sp.center, sp.scale(), std::cos(sp.rotation),
                                 std::sin(sp.rotation), sp.opacity()});
        }
    }

    Eigen::Vector2d scene_point(int px, int py) const {
        return inverse_ * (Eigen::Vector2d(px + 0.5, py + 0.5) - offset_);
    }

    // Returns false when the pixel lies outside the truncated footprint.
    bool footprint(const Prepared& p, const Eigen::Vector2d& q, Footprint& out) const {
        const Eigen::Vector2d e = q - p.center;
        out.r = Eigen::Vector2d(p.cos_r * e.x() + p.sin_r * e.y(),
                                -p.sin_r * e.x() + p.cos_r * e.y());
        out.u = out.r.cwiseQuotient(p.scale);
        const double m = out.u.squaredNorm();
        if (m > cutoff_) return false;
        out.alpha = p.opacity * std::exp(-0.5 * m);
        return true;
    }

    const std::vector<Prepared>& prepared() const { return prepared_; }
    const SplatScene& scene() const { return scene_; }
    const View& view() const { return view_; }

private:
    const SplatScene& scene_;
    const View& view_;
    double cutoff_ = 0.0;
    Eigen::Matrix2d inverse_;
    Eigen::Vector2d offset_;
    std::vector<Prepared> prepared_;
};

} // namespace

Vec
render(const SplatScene& scene, const View& view, const RenderOptions& options) {
    const Rasterizer raster(scene, view, options);
    const int c = scene.channels();
    Vec image(static_cast<Eigen::Index>(view.width) * view.height * c);
    Footprint fp;
    Eigen::VectorXd color(c);
    for (int py = 0; py < view.height; ++py) {
        for (int px = 0; px < view.width; ++px) {
            const Eigen::Vector2d q = raster.scene_point(px, py);
            double transmittance = 1.0;
            color.setZero();
            for (const Prepared& p : raster.prepared()) {
                if (!raster.footprint(p, q, fp)) continue;
                color += transmittance * fp.alpha * scene.splats[p.index].color;
                transmittance *= 1.0 - fp.alpha;
            }
            color += transmittance * scene.background;
            image.segment((static_cast<Eigen::Index>(py) * view.width + px) * c, c) = color;
        }
    }
    return image;
}

SceneGradient
render_backward(const SplatScene& scene, const View& view, const Vec& grad_image,
                const RenderOptions& options) {
    const Rasterizer raster(scene, view, options);
    const int c = scene.channels();
    if (grad_image.size() != static_cast<Eigen::Index>(view.width) * view.height * c) {
        throw DimensionError("image gradient size does not match the view");
    }

    SceneGradient grad;
    grad.splats.resize(scene.splats.size());
    for (auto& g : grad.splats) g.color = Eigen::VectorXd::Zero(c);
    grad.background = Eigen::VectorXd::Zero(c);

    struct Hit {
        const Prepared* p;
        Footprint fp;
        double transmittance;
    };
    std::vector<Hit> hits;
    hits.reserve(raster.prepared().size());
    Eigen::VectorXd behind(c);

    for (int py = 0; py < view.height; ++py) {
        for (int px = 0; px < view.width; ++px) {
            const Eigen::VectorXd g =
                grad_image.segment((static_cast<Eigen::Index>(py) * view.width + px) * c, c);
            const Eigen::Vector2d q = raster.scene_point(px, py);

            hits.clear();
            double transmittance = 1.0;
            for (const Prepared& p : raster.prepared()) {
                Hit h{&p, {}, transmittance};
                if (!raster.footprint(p, q, h.fp)) continue;
                hits.push_back(h);
                transmittance *= 1.0 - h.fp.alpha;
            }
            grad.background += transmittance * g;

            // Walk back to front, carrying the composite of everything behind.
            behind = scene.background;
            for (auto it = hits.rbegin(); it != hits.rend(); ++it) {
                const Prepared& p = *it->p;
                const Splat2D& sp = scene.splats[p.index];
                SplatGradient& out = grad.splats[p.index];
                const double a = it->fp.alpha;
                const double t = it->transmittance;

                out.color += t * a * g;
                const double d_alpha = t * g.dot(sp.color - behind);
                behind = a * sp.color + (1.0 - a) * behind;

                out.logit_opacity += d_alpha * a * (1.0 - p.opacity);
                const double d_power = d_alpha * a;
                const Eigen::Vector2d& u = it->fp.u;
                const Eigen::Vector2d& r = it->fp.r;
                out.log_scale += d_power * u.cwiseProduct(u);
                const Eigen::Vector2d w = u.cwiseQuotient(p.scale);
                out.center += d_power * Eigen::Vector2d(p.cos_r * w.x() - p.sin_r * w.y(),
                                                        p.sin_r * w.x() + p.cos_r * w.y());
                out.rotation += d_power * (-w.x() * r.y() + w.y() * r.x());
            }
        }
    }
    return grad;
}

} // namespace ismlab
