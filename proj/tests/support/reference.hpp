// Copyright Contributors to the ism-lab project
// SPDX-License-Identifier: Apache-2.0

// Independent, deliberately naive re-derivations used as test oracles. They
// share no code with the library beyond plain data types.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

namespace ref {

using real = long double;

/// Linear beta ramp and cumulative products, extended precision.
inline std::vector<real>
alpha_bars(int steps, real beta_start, real beta_end) {
    std::vector<real> ab(steps + 1);
    ab[0] = 1.0L;
    for (int t = 1; t <= steps; ++t) {
        const real beta = beta_start + (beta_end - beta_start) * (t - 1) / real(steps - 1);
        ab[t] = ab[t - 1] * (1.0L - beta);
    }
    return ab;
}

struct Gaussian {
    real weight;
    std::vector<real> mean;
    real sigma;
};

/// Noised mixture density log p_t(x) by direct summation.
inline real
log_density(const std::vector<Gaussian>& mix, real ab, const std::vector<real>& x) {
    real total_w = 0;
    for (const auto& g : mix) total_w += g.weight;
    real p = 0;
    const std::size_t d = x.size();
    for (const auto& g : mix) {
        const real var = ab * g.sigma * g.sigma + 1 - ab;
        real q = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const real diff = x[i] - std::sqrt(ab) * g.mean[i];
            q += diff * diff;
        }
        p += g.weight / total_w * std::exp(-0.5L * q / var) /
             std::pow(2 * 3.14159265358979323846264338327950288L * var, real(d) / 2);
    }
    return std::log(p);
}

/// -sqrt(1 - ab) * grad log p_t(x), from the Gaussian posterior form
/// sum_k r_k (x - sqrt(ab) mu_k) / var_k with plain (non log-space) weights.
inline std::vector<real>
eps(const std::vector<Gaussian>& mix, real ab, const std::vector<real>& x) {
    const std::size_t d = x.size();
    std::vector<real> out(d, 0);
    if (ab == 1) return out;
    std::vector<real> dens(mix.size());
    real total = 0;
    for (std::size_t k = 0; k < mix.size(); ++k) {
        const auto& g = mix[k];
        const real var = ab * g.sigma * g.sigma + 1 - ab;
        real q = 0;
        for (std::size_t i = 0; i < d; ++i) {
            const real diff = x[i] - std::sqrt(ab) * g.mean[i];
            q += diff * diff;
        }
        dens[k] = g.weight * std::exp(-0.5L * q / var) / std::pow(var, real(d) / 2);
        total += dens[k];
    }
    for (std::size_t k = 0; k < mix.size(); ++k) {
        const auto& g = mix[k];
        const real var = ab * g.sigma * g.sigma + 1 - ab;
        for (std::size_t i = 0; i < d; ++i) {
            out[i] += dens[k] / total * (x[i] - std::sqrt(ab) * g.mean[i]) / var;
        }
    }
    for (auto& v : out) v *= std::sqrt(1 - ab);
    return out;
}

struct Splat {
    real cx, cy, sx, sy, rot;
    std::vector<real> color;
    real opacity;
    real depth;
};

/// Per-pixel compositor: full covariance inverse rather than whitening,
/// explicit sort, extended precision. affine = {a00, a01, b0, a10, a11, b1}.
inline std::vector<real>
composite(const std::vector<Splat>& splats, const std::vector<real>& background,
          const real affine[6], int width, int height, real cutoff_sigmas) {
    const std::size_t c = background.size();
    std::vector<std::size_t> order(splats.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return splats[a].depth < splats[b].depth; });
    const real det = affine[0] * affine[4] - affine[1] * affine[3];
    std::vector<real> img(static_cast<std::size_t>(width) * height * c);
    for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
            const real ix = px + 0.5L - affine[2], iy = py + 0.5L - affine[5];
            const real qx = (affine[4] * ix - affine[1] * iy) / det;
            const real qy = (-affine[3] * ix + affine[0] * iy) / det;
            std::vector<real> acc(c, 0);
            real trans = 1;
            for (std::size_t idx : order) {
                const Splat& s = splats[idx];
                const real cs = std::cos(s.rot), sn = std::sin(s.rot);
                // Sigma = R diag(sx^2, sy^2) R^T
                const real s00 = cs * cs * s.sx * s.sx + sn * sn * s.sy * s.sy;
                const real s01 = cs * sn * (s.sx * s.sx - s.sy * s.sy);
                const real s11 = sn * sn * s.sx * s.sx + cs * cs * s.sy * s.sy;
                const real sdet = s00 * s11 - s01 * s01;
                const real dx = qx - s.cx, dy = qy - s.cy;
                const real m = (s11 * dx * dx - 2 * s01 * dx * dy + s00 * dy * dy) / sdet;
                if (m > cutoff_sigmas * cutoff_sigmas) continue;
                const real a = s.opacity * std::exp(-0.5L * m);
                for (std::size_t k = 0; k < c; ++k) acc[k] += trans * a * s.color[k];
                trans *= 1 - a;
            }
            for (std::size_t k = 0; k < c; ++k) {
                img[(static_cast<std::size_t>(py) * width + px) * c + k] = acc[k] + trans * background[k];
            }
        }
    }
    return img;
}

} // namespace ref
