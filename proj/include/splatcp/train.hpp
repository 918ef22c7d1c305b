// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/avatar_store.hpp>
#include <splatcp/dataset.hpp>
#include <splatcp/losses.hpp>
#include <splatcp/optim.hpp>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace splatcp {

struct TrainConfig {
    std::size_t iterations = 2000;
    LearningRates rates;
    LossWeights weights;
    MaskMode mode = MaskMode::Full;
    std::size_t mode_identity = 0;
    std::size_t warmup = 0; // iterations with the CP factors frozen
    std::optional<TrainMask> custom_mask; // overrides `mode` when set
};

struct HistoryEntry {
    std::size_t iteration = 0;
    std::size_t identity = 0;
    std::size_t frame = 0;
    double loss = 0.0;
    double l1 = 0.0;
    double mask = 0.0;
    double isopos = 0.0;
    double isocov = 0.0;
    double psnr = 0.0; // of the frame rendered at this iteration, before the update
};

struct TrainResult {
    FactorizedAvatarStore store;
    std::vector<HistoryEntry> history;
    std::size_t skipped_gradients = 0;
};

/// Raised when the loss turns non-finite; `what()` carries a snapshot of the
/// iteration, identity, frame and loss terms.
class TrainingError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Round-robin over identities (one frame per identity per cycle), each
/// identity cycling through its training frames in order.
TrainResult train(const FactorizedAvatarStore &store, const SyntheticDataset &ds, const TrainConfig &cfg);

/// Appends a mean identity row and fits only that row (plus its residual when
/// personalization is enabled) to the new identity's frames.
TrainResult fit_novel_identity(const FactorizedAvatarStore &store, const Scene &scene,
                               const std::vector<Frame> &frames, const TrainConfig &cfg);

/// Fits only identity i's appearance/opacity residual; CP factors are frozen.
TrainResult personalize(const FactorizedAvatarStore &store, std::size_t identity, const Scene &scene,
                        const std::vector<Frame> &frames, const TrainConfig &cfg);

/// Gradient of the total loss for one frame with respect to identity i's raw
/// slice (residual included). Exposed for gradient checking.
struct FrameGradient {
    LossResult loss;
    Mat grad_raw;
    Image render;
};
FrameGradient frame_gradient(const FactorizedAvatarStore &store, std::size_t identity, const Scene &scene,
                             const Frame &frame, const std::vector<Edge> &edges, const LossWeights &weights);

struct FrameMetric {
    std::size_t identity = 0;
    std::size_t frame = 0;
    double psnr = 0.0;
    double mse = 0.0;
};

struct Metrics {
    double psnr = 0.0; // from the MSE pooled over every frame of the split
    double mse = 0.0;
    std::vector<FrameMetric> frames;
};

Image render_identity(const FactorizedAvatarStore &store, std::size_t identity, const Scene &scene, const Pose &pose);

Metrics evaluate(const FactorizedAvatarStore &store, const SyntheticDataset &ds, Split split);
Metrics evaluate_frames(const FactorizedAvatarStore &store, std::size_t identity, const Scene &scene,
                        const std::vector<Frame> &frames);

} // namespace splatcp
