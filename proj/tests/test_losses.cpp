// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/deform.hpp>
#include <splatcp/losses.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace splatcp;
using splatcp::testing::central_diff;
using splatcp::testing::flatten;
using splatcp::testing::rel_diff;
using splatcp::testing::uniform;
using splatcp::testing::unflatten;

namespace {

Image random_image(int w, int h, std::mt19937_64 &rng) {
    Image img(w, h);
    for (double &v : img.rgb) v = uniform(rng, 0.0, 1.0);
    return img;
}

AlphaMask random_mask(int w, int h, std::mt19937_64 &rng) {
    AlphaMask m(w, h);
    for (double &v : m.alpha) v = uniform(rng, 0.0, 1.0);
    return m;
}

} // namespace

TEST(TotalLoss, ZeroWhenPredictionMatchesAndNoDeformation) {
    std::mt19937_64 rng(1);
    const Image img = random_image(8, 8, rng);
    const AlphaMask m = random_mask(8, 8, rng);
    const GaussianSet gs = splatcp::testing::random_gaussians(10, rng);
    const std::vector<Edge> edges = build_knn(gs.position);
    const LossResult r = total_loss(img, m, img, m, DeformPair{&gs, &gs, &edges}, LossWeights{});
    EXPECT_EQ(r.total, 0.0);
}

TEST(TotalLoss, WhiteVersusBlackIsOne) {
    LossWeights w;
    w.mask = w.isopos = w.isocov = 0.0;
    const LossResult r = total_loss(Image(4, 4, 1.0), AlphaMask(4, 4), Image(4, 4, 0.0), AlphaMask(4, 4), {}, w);
    EXPECT_DOUBLE_EQ(r.total, 1.0);
    EXPECT_DOUBLE_EQ(r.l1, 1.0);
}

TEST(TotalLoss, TermsAreWeighted) {
    std::mt19937_64 rng(2);
    const Image a = random_image(6, 5, rng), b = random_image(6, 5, rng);
    const AlphaMask ma = random_mask(6, 5, rng), mb = random_mask(6, 5, rng);
    const LossWeights w{2.0, 3.0, 0.0, 0.0};
    const LossResult r = total_loss(a, ma, b, mb, {}, w);
    double mask_l1 = 0.0;
    for (std::size_t k = 0; k < ma.alpha.size(); ++k) mask_l1 += std::abs(ma.alpha[k] - mb.alpha[k]);
    mask_l1 /= static_cast<double>(ma.alpha.size());
    EXPECT_NEAR(r.l1, l1_distance(a, b), 1e-15);
    EXPECT_NEAR(r.mask, mask_l1, 1e-15);
    EXPECT_NEAR(r.total, 2.0 * r.l1 + 3.0 * r.mask, 1e-15);
}

TEST(TotalLoss, RejectsShapeMismatchAndNegativeWeights) {
    EXPECT_THROW(total_loss(Image(4, 4), AlphaMask(4, 4), Image(4, 5), AlphaMask(4, 5), {}, {}), std::invalid_argument);
    LossWeights w;
    w.l1 = -1.0;
    EXPECT_THROW(w.validate(), std::invalid_argument);
}

TEST(TotalLoss, CombinedGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    Image pred = random_image(6, 6, rng);
    AlphaMask pmask = random_mask(6, 6, rng);
    const Image target = random_image(6, 6, rng);
    const AlphaMask tmask = random_mask(6, 6, rng);
    GaussianSet canon = splatcp::testing::random_gaussians(10, rng);
    GaussianSet obs = canon;
    for (std::size_t g = 0; g < obs.size(); ++g) {
        obs.position[g][0] += uniform(rng, -0.05, 0.05);
        obs.position[g][1] += uniform(rng, -0.05, 0.05);
        obs.scale[g][1] *= uniform(rng, 0.8, 1.2);
        obs.angle[g] += uniform(rng, -0.3, 0.3);
    }
    const std::vector<Edge> edges = build_knn(canon.position);
    const LossWeights w{};
    const LossResult r = total_loss(pred, pmask, target, tmask, DeformPair{&canon, &obs, &edges}, w);
    auto f = [&] { return total_loss(pred, pmask, target, tmask, DeformPair{&canon, &obs, &edges}, w).total; };
    EXPECT_LT(rel_diff(r.grad_image.rgb, central_diff(pred.rgb, f)), 1e-4);
    EXPECT_LT(rel_diff(r.grad_mask.alpha, central_diff(pmask.alpha, f)), 1e-4);

    std::vector<double> xc = flatten(canon), xo = flatten(obs);
    auto fg = [&] {
        unflatten(xc, canon);
        unflatten(xo, obs);
        return f();
    };
    EXPECT_LT(rel_diff(flatten(r.grad_canonical), central_diff(xc, fg)), 1e-4);
    EXPECT_LT(rel_diff(flatten(r.grad_observed), central_diff(xo, fg)), 1e-4);
}

TEST(Metrics, PsnrAndMse) {
    EXPECT_DOUBLE_EQ(mse(Image(2, 2, 0.0), Image(2, 2, 0.5)), 0.25);
    EXPECT_NEAR(psnr_from_mse(0.01), 20.0, 1e-12);
    EXPECT_NEAR(psnr(Image(3, 3, 0.2), Image(3, 3, 0.3)), 20.0, 1e-9);
    // Identical images hit the MSE floor instead of infinity.
    EXPECT_DOUBLE_EQ(psnr(Image(3, 3, 0.2), Image(3, 3, 0.2)), 120.0);
    EXPECT_DOUBLE_EQ(l1_distance(Image(1, 1, 0.0), Image(1, 1, 0.25)), 0.25);
}
