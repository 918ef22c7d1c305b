// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/avatar_store.hpp>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace splatcp {

/// Exponential decay from `initial` to `final` over max_steps; constant when
/// `decay` is false.
struct LrSchedule {
    double initial = 0.0;
    double final = 0.0;
    bool decay = false;

    double at(std::size_t step, std::size_t max_steps) const;
};

/// Per-block learning rates. Rows of u_params use the rate of their layout
/// block; u_identity and u_gaussian use `factors`; residual columns use the
/// appearance/opacity rates.
struct LearningRates {
    LrSchedule position{1.6e-4, 1.6e-6, true};
    LrSchedule factors{1.6e-4, 1.6e-6, true};
    double scale = 5e-3;
    double rotation = 1e-3;
    double appearance = 2.5e-3;
    double opacity = 5e-2;

    void validate() const;
};

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamMoments {
    std::vector<double> m;
    std::vector<double> v;

    explicit AdamMoments(std::size_t n = 0) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update at 1-based step `t`, touching only entries
/// whose mask byte is set. `lr` holds one rate per entry. Entries with a
/// non-finite gradient are left untouched; the return value counts them.
std::size_t adam_update(std::span<double> params, std::span<const double> grads,
                        std::span<const std::uint8_t> mask, std::span<const double> lr, AdamMoments &state,
                        std::size_t t, const AdamParams &hp = {});

struct StoreGrads {
    FactorGrads factors;
    std::vector<Mat> residual; // empty, or one per identity
};

/// Adam state for every trainable array of a FactorizedAvatarStore.
class StoreOptimizer {
  public:
    StoreOptimizer(const FactorizedAvatarStore &store, LearningRates rates, std::size_t max_steps,
                   AdamParams hp = {});

    /// Applies one masked step; returns the number of skipped non-finite entries.
    std::size_t step(FactorizedAvatarStore &store, const StoreGrads &grads, const TrainMask &mask);

    std::size_t steps_taken() const { return step_; }
    std::size_t skipped_total() const { return skipped_; }
    /// Learning rate for u_params row `p` at the current step.
    double params_row_rate(const ParamLayout &layout, std::size_t p) const;

  private:
    LearningRates rates_;
    std::size_t max_steps_;
    AdamParams hp_;
    std::size_t step_ = 0;
    std::size_t skipped_ = 0;
    AdamMoments params_, identity_, gaussian_;
    std::vector<AdamMoments> residual_;
};

} // namespace splatcp
