// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/deform.hpp>
#include <splatcp/render.hpp>

#include <vector>

namespace splatcp {

struct LossWeights {
    double l1 = 1.0;
    double mask = 0.1;
    double isopos = 1.0;
    double isocov = 100.0;

    void validate() const;
};

/// Canonical/observed pair plus the k-NN edges the iso terms run over.
struct DeformPair {
    const GaussianSet *canonical = nullptr;
    const GaussianSet *observed = nullptr;
    const std::vector<Edge> *edges = nullptr;
};

struct LossResult {
    double total = 0.0;
    double l1 = 0.0;
    double mask = 0.0;
    double isopos = 0.0;
    double isocov = 0.0;
    Image grad_image;
    AlphaMask grad_mask;
    GaussianGrads grad_canonical; // iso terms only
    GaussianGrads grad_observed;  // iso terms only
};

/// l1 * mean|dRGB| + mask * mean|dmask| + isopos * L_isopos + isocov * L_isocov.
/// The iso terms are skipped when `deform` has null members.
LossResult total_loss(const Image &pred, const AlphaMask &pred_mask, const Image &target,
                      const AlphaMask &target_mask, const DeformPair &deform, const LossWeights &w);

constexpr double kMseFloor = 1e-12;

double mse(const Image &a, const Image &b);
/// 10 log10(1 / max(MSE, 1e-12)) over RGB in [0, 1].
double psnr_from_mse(double mse);
double psnr(const Image &a, const Image &b);
/// Mean absolute RGB difference.
double l1_distance(const Image &a, const Image &b);

} // namespace splatcp
