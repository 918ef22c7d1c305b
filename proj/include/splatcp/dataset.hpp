// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/deform.hpp>
#include <splatcp/render.hpp>

#include <cstdint>
#include <vector>

namespace splatcp {

struct DatasetSpec {
    std::size_t identities = 4;
    std::size_t gaussians = 64;
    std::size_t bones = 5;
    int image_size = 32;
    std::size_t train_poses = 8;
    std::size_t heldout_poses = 4;
    double train_angle_max = 0.35;  // train angles in [-max, max]
    double heldout_angle_min = 0.5; // held-out |angle| in [min, max]
    double heldout_angle_max = 0.9;

    void validate() const;
};

struct Frame {
    Pose pose;
    Image target;
    AlphaMask target_mask;
};

struct IdentityData {
    GaussianSet ground_truth; // canonical space
    std::vector<Frame> train;
    std::vector<Frame> held_out;
};

/// Skeleton and camera shared by every identity.
struct Scene {
    Skeleton2D skeleton;
    Viewport viewport;
};

/// Targets are rendered by this library's own renderer from the ground truth.
struct SyntheticDataset {
    DatasetSpec spec;
    std::uint64_t seed = 0;
    Scene scene;
    std::vector<IdentityData> identities;
};

enum class Split { Train, HeldOut };

Viewport default_viewport(int image_size);

/// Deterministic in (spec, seed). Identities differ in colors, blob layout
/// along the bones, and limb/torso thickness.
SyntheticDataset generate_dataset(const DatasetSpec &spec, std::uint64_t seed);

/// Renders the target image and mask for one pose of a canonical set.
Frame render_frame(const GaussianSet &canonical, const Scene &scene, const Pose &pose);

/// Generic initialization in the spirit of sampling the first identity's body:
/// its ground-truth positions with jitter, then default scale, zero angle,
/// grey color and opacity 0.5.
GaussianSet seed_gaussians(const SyntheticDataset &ds, std::uint64_t seed, double jitter = 0.02,
                           double scale = 0.06);

/// The first `n` identities; the rest are returned in `rest` when non-null.
SyntheticDataset take_identities(const SyntheticDataset &ds, std::size_t n, std::vector<IdentityData> *rest = nullptr);

} // namespace splatcp
