// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/layout.hpp>

#include <cstddef>
#include <utility>
#include <vector>

namespace splatcp {

struct Bone {
    int parent = -1;          // -1 for the root (bone 0)
    Vec2 origin{0.0, 0.0};    // joint position in canonical space
    double length = 1.0;
    double rest_angle = 0.0;  // segment direction in canonical space
};

/// Tree of 2D bone segments rooted at bone 0.
class Skeleton2D {
  public:
    Skeleton2D() = default;
    /// Throws std::invalid_argument on cycles, a non-root bone 0, extra roots,
    /// or non-positive lengths.
    explicit Skeleton2D(std::vector<Bone> bones);

    std::size_t size() const { return bones_.size(); }
    const Bone &bone(std::size_t b) const { return bones_[b]; }
    const std::vector<Bone> &bones() const { return bones_; }
    Vec2 segment_end(std::size_t b) const;
    /// Bones ordered so each parent precedes its children.
    const std::vector<std::size_t> &topo_order() const { return order_; }

  private:
    std::vector<Bone> bones_;
    std::vector<std::size_t> order_;
};

/// Stick figure with 1..9 bones: torso, then arms/legs, then forearms/shins.
Skeleton2D make_stick_figure(std::size_t n_bones);

struct Pose {
    std::vector<double> angles; // per-bone rotation relative to rest, radians
    Vec2 root_translation{0.0, 0.0};
};

/// x -> linear * x + translation, linear = [[m00, m01], [m10, m11]].
struct Rigid2D {
    double m00 = 1.0, m01 = 0.0, m10 = 0.0, m11 = 1.0;
    Vec2 t{0.0, 0.0};

    Vec2 apply(Vec2 p) const { return {m00 * p[0] + m01 * p[1] + t[0], m10 * p[0] + m11 * p[1] + t[1]}; }
    bool operator==(const Rigid2D &) const = default;
};

using BoneTransforms = std::vector<Rigid2D>;

/// Each bone rotates about its own joint, then inherits its parent's transform.
BoneTransforms forward_kinematics(const Skeleton2D &sk, const Pose &pose);

constexpr double kSkinTemperature = 0.1;

double segment_distance(Vec2 p, const Skeleton2D &sk, std::size_t bone, Vec2 *grad = nullptr);

/// softmax(-dist(p, segment_b) / tau) over bones.
std::vector<double> skinning_weights(Vec2 p, const Skeleton2D &sk, double tau = kSkinTemperature);

/// Linear blend skinning of canonical Gaussians. The blended transform is
/// accumulated as B_0 + sum_b w_b (B_b - B_0), which equals sum_b w_b B_b for
/// normalized weights and is exact when all bones share one transform.
GaussianSet lbs_apply(const GaussianSet &canonical, const BoneTransforms &bt, const Skeleton2D &sk);

/// Gradient on canonical Gaussians given the gradient on lbs_apply's output.
/// Position and angle go through the blend (including the weights'
/// dependence on position); scale, color and opacity pass through.
GaussianGrads lbs_backward(const GaussianSet &canonical, const BoneTransforms &bt, const Skeleton2D &sk,
                           const GaussianGrads &grad_observed);

using Edge = std::pair<std::size_t, std::size_t>;

/// Directed k-nearest-neighbour edges (a -> b) on positions, ties broken by index.
std::vector<Edge> build_knn(const std::vector<Vec2> &positions, std::size_t k = 5);

/// k-NN graph that is rebuilt only after the positions drift by more than
/// `rebuild_rms` (root mean square displacement) since the last build.
class KnnCache {
  public:
    explicit KnnCache(std::size_t k = 5, double rebuild_rms = 1e-3) : k_(k), rebuild_rms_(rebuild_rms) {}
    const std::vector<Edge> &edges(const std::vector<Vec2> &positions);
    std::size_t rebuilds() const { return rebuilds_; }

  private:
    std::size_t k_;
    double rebuild_rms_;
    std::vector<Vec2> anchor_;
    std::vector<Edge> edges_;
    std::size_t rebuilds_ = 0;
};

struct IsoLosses {
    double isopos = 0.0;
    double isocov = 0.0;
    std::size_t skipped_edges = 0;
    GaussianGrads isopos_canonical, isopos_observed;
    GaussianGrads isocov_canonical, isocov_observed;
};

/// Mean over edges of | |mu_c^a - mu_c^b| - |mu_o^a - mu_o^b| | and of
/// | |Sigma_o^a - Sigma_o^b|_F - |Sigma_c^a - Sigma_c^b|_F |. Edges whose
/// canonical endpoints coincide are skipped.
IsoLosses iso_losses(const GaussianSet &canonical, const GaussianSet &observed, const std::vector<Edge> &edges);

} // namespace splatcp
