// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/layout.hpp>

#include <cstddef>
#include <vector>

namespace splatcp {

/// World-to-pixel map. `origin` is the world point at the top-left image
/// corner; x grows right and world y grows up (image rows grow down):
///   px = (x - origin.x) * pixels_per_unit,  py = (origin.y - y) * pixels_per_unit
/// Pixel (u, v) is sampled at its center (u + 0.5, v + 0.5).
struct Viewport {
    int width = 0;
    int height = 0;
    Vec2 origin{0.0, 0.0};
    double pixels_per_unit = 1.0;

    void validate() const;
    bool operator==(const Viewport &) const = default;
};

struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> rgb; // row-major, 3 channels per pixel

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), rgb(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3, fill) {}
    std::size_t pixels() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
    bool operator==(const Image &) const = default;
};

struct AlphaMask {
    int width = 0;
    int height = 0;
    std::vector<double> alpha;

    AlphaMask() = default;
    AlphaMask(int w, int h, double fill = 0.0)
        : width(w), height(h), alpha(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}
    std::size_t pixels() const { return alpha.size(); }
    bool operator==(const AlphaMask &) const = default;
};

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Sym2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;
};

/// R(angle) diag(s1^2, s2^2) R(angle)^T.
Sym2 covariance2d(Vec2 scale, double angle);

struct CovarianceGrad {
    Vec2 scale{0.0, 0.0};
    double angle = 0.0;
};

/// Pulls a gradient on (xx, xy, yy) back to scale and angle. `g.xy` is the
/// derivative with respect to the single shared off-diagonal value.
CovarianceGrad covariance2d_backward(Vec2 scale, double angle, const Sym2 &g);

constexpr double kAlphaMax = 0.999;
constexpr double kSupportSigmas = 3.0;
constexpr double kCovarianceJitter = 1e-8;

struct RenderResult {
    Image image;
    AlphaMask mask;
    std::size_t jitter_count = 0; // Gaussians whose covariance needed jitter
};

/// Front-to-back compositing in ascending Gaussian index order over a black
/// background. Each Gaussian touches only pixels inside its 3-sigma box.
RenderResult render(const GaussianSet &gs, const Viewport &vp);

/// Exact gradient of render() for upstream gradients on the image and mask.
/// The support box is treated as fixed and the alpha clamp passes no gradient.
GaussianGrads render_backward(const GaussianSet &gs, const Viewport &vp, const Image &grad_image,
                              const AlphaMask &grad_mask);

} // namespace splatcp
