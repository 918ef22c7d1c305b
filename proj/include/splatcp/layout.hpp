// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/tensor.hpp>

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace splatcp {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

enum class LayoutId : std::uint32_t {
    Planar2D = 0,     // M = 9
    Volumetric3D = 1, // M = 43
    Generic = 2,      // raw tensor, no per-block meaning
};

struct Block {
    std::size_t offset = 0;
    std::size_t length = 0;
    std::size_t end() const { return offset + length; }
};

/// Column layout of one Gaussian's raw parameter vector.
struct ParamLayout {
    LayoutId id = LayoutId::Planar2D;
    Block position;
    Block scale_log;
    Block rotation;
    Block appearance;
    Block opacity_logit;
    std::size_t total = 0;

    /// Columns covered by a personalization residual (appearance + opacity).
    Block residual_block() const { return {appearance.offset, opacity_logit.end() - appearance.offset}; }

    void validate() const;
};

ParamLayout layout_2d();
ParamLayout layout_3d();
ParamLayout layout_generic(std::size_t m);
ParamLayout layout_for(LayoutId id, std::size_t m);

/// Activated 2D Gaussians (world units). Rotation is an angle in radians.
struct GaussianSet {
    std::vector<Vec2> position;
    std::vector<Vec2> scale;
    std::vector<double> angle;
    std::vector<Vec3> color;
    std::vector<double> opacity;

    GaussianSet() = default;
    explicit GaussianSet(std::size_t n)
        : position(n), scale(n, Vec2{1.0, 1.0}), angle(n, 0.0), color(n), opacity(n, 0.0) {}

    std::size_t size() const { return position.size(); }
    bool operator==(const GaussianSet &) const = default;
};

/// Gradient of a scalar with respect to the fields of a GaussianSet.
struct GaussianGrads {
    std::vector<Vec2> position;
    std::vector<Vec2> scale;
    std::vector<double> angle;
    std::vector<Vec3> color;
    std::vector<double> opacity;

    GaussianGrads() = default;
    explicit GaussianGrads(std::size_t n)
        : position(n, Vec2{}), scale(n, Vec2{}), angle(n, 0.0), color(n, Vec3{}), opacity(n, 0.0) {}

    std::size_t size() const { return position.size(); }
    GaussianGrads &operator+=(const GaussianGrads &o);
};

double sigmoid(double x);
double logit(double p);

/// Raw N_g x 9 slice to activated Gaussians: scale = exp, color/opacity = sigmoid,
/// position and angle pass through.
GaussianSet activate(const Mat &raw, const ParamLayout &layout);
Mat inverse_activate(const GaussianSet &gs, const ParamLayout &layout);

/// Chain rule from activated-space gradients to raw-slice gradients.
Mat activation_backward(const Mat &raw, const GaussianGrads &grad, const ParamLayout &layout);

/// One activated 3D Gaussian. Features are carried raw.
struct Gaussian3D {
    std::array<double, 3> position{};
    std::array<double, 3> scale{};
    std::array<double, 4> rotation{}; // unit quaternion (w, x, y, z)
    std::vector<double> features;
    double opacity = 0.0;
};

struct Gaussian3DGrad {
    std::array<double, 3> position{};
    std::array<double, 3> scale{};
    std::array<double, 4> rotation{};
    std::vector<double> features;
    double opacity = 0.0;
};

Gaussian3D activate_3d(std::span<const double> raw_row, const ParamLayout &layout);
std::vector<double> activation_backward_3d(std::span<const double> raw_row, const Gaussian3DGrad &grad,
                                           const ParamLayout &layout);

} // namespace splatcp
