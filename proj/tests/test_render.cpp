// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/render.hpp>

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace splatcp;
using splatcp::testing::central_diff;
using splatcp::testing::flatten;
using splatcp::testing::rel_diff;
using splatcp::testing::uniform;
using splatcp::testing::unflatten;

namespace {

// World [0, 1]^2 onto 16x16 pixels.
Viewport unit_viewport(int size = 16) { return Viewport{size, size, {0.0, 1.0}, static_cast<double>(size)}; }

Vec2 pixel_center(const Viewport &vp, int u, int v) {
    return {vp.origin[0] + (u + 0.5) / vp.pixels_per_unit, vp.origin[1] - (v + 0.5) / vp.pixels_per_unit};
}

struct LinearLoss {
    Image wi;
    AlphaMask wm;
    double operator()(const GaussianSet &gs, const Viewport &vp) const {
        const RenderResult r = render(gs, vp);
        double s = 0.0;
        for (std::size_t k = 0; k < r.image.rgb.size(); ++k) s += wi.rgb[k] * r.image.rgb[k];
        for (std::size_t k = 0; k < r.mask.alpha.size(); ++k) s += wm.alpha[k] * r.mask.alpha[k];
        return s;
    }
};

LinearLoss random_loss(int size, std::mt19937_64 &rng) {
    LinearLoss l{Image(size, size), AlphaMask(size, size)};
    for (double &v : l.wi.rgb) v = uniform(rng, -1.0, 1.0);
    for (double &v : l.wm.alpha) v = uniform(rng, -1.0, 1.0);
    return l;
}

} // namespace

TEST(Covariance, AxisAlignedAndSwapped) {
    const Sym2 a = covariance2d({1.0, 2.0}, 0.0);
    EXPECT_EQ(a.xx, 1.0);
    EXPECT_EQ(a.xy, 0.0);
    EXPECT_EQ(a.yy, 4.0);
    const Sym2 b = covariance2d({1.0, 2.0}, std::numbers::pi / 2);
    EXPECT_NEAR(b.xx, 4.0, 1e-12);
    EXPECT_NEAR(b.xy, 0.0, 1e-12);
    EXPECT_NEAR(b.yy, 1.0, 1e-12);
}

TEST(Covariance, DeterminantIsRotationInvariant) {
    std::mt19937_64 rng(1);
    for (int n = 0; n < 50; ++n) {
        const Vec2 s{uniform(rng, 0.1, 3.0), uniform(rng, 0.1, 3.0)};
        const Sym2 c = covariance2d(s, uniform(rng, -4.0, 4.0));
        const double want = s[0] * s[0] * s[1] * s[1];
        EXPECT_NEAR(c.xx * c.yy - c.xy * c.xy, want, 1e-12 * std::max(1.0, want));
    }
}

TEST(Covariance, BackwardMatchesFiniteDifferences) {
    std::mt19937_64 rng(2);
    for (int n = 0; n < 10; ++n) {
        std::vector<double> x{uniform(rng, 0.2, 2.0), uniform(rng, 0.2, 2.0), uniform(rng, -3.0, 3.0)};
        const Sym2 w{uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0), uniform(rng, -1.0, 1.0)};
        auto f = [&] {
            const Sym2 c = covariance2d({x[0], x[1]}, x[2]);
            return w.xx * c.xx + w.xy * c.xy + w.yy * c.yy;
        };
        const CovarianceGrad g = covariance2d_backward({x[0], x[1]}, x[2], w);
        EXPECT_LT(rel_diff({g.scale[0], g.scale[1], g.angle}, central_diff(x, f)), 1e-8);
    }
}

TEST(Render, EmptySetIsBlack) {
    const RenderResult r = render(GaussianSet(0), unit_viewport());
    for (double v : r.image.rgb) EXPECT_EQ(v, 0.0);
    for (double v : r.mask.alpha) EXPECT_EQ(v, 0.0);
}

TEST(Render, SingleGaussianAtItsMean) {
    const Viewport vp = unit_viewport();
    GaussianSet gs(1);
    gs.position[0] = pixel_center(vp, 5, 9);
    gs.scale[0] = {0.1, 0.05};
    gs.angle[0] = 0.3;
    gs.color[0] = {0.2, 0.6, 0.9};
    gs.opacity[0] = 0.7;
    const RenderResult r = render(gs, vp);
    const std::size_t px = 9 * 16 + 5;
    for (int c = 0; c < 3; ++c) EXPECT_DOUBLE_EQ(r.image.rgb[px * 3 + c], gs.color[0][c] * 0.7);
    EXPECT_DOUBLE_EQ(r.mask.alpha[px], 0.7);

    Image gi(16, 16);
    gi.rgb[px * 3] = 1.0;
    const GaussianGrads g = render_backward(gs, vp, gi, AlphaMask(16, 16));
    EXPECT_DOUBLE_EQ(g.color[0][0], 0.7);
    EXPECT_EQ(g.color[0][1], 0.0);
}

TEST(Render, TwoCoincidentGaussiansComposite) {
    const Viewport vp = unit_viewport();
    GaussianSet gs(2);
    for (std::size_t g = 0; g < 2; ++g) {
        gs.position[g] = pixel_center(vp, 8, 8);
        gs.scale[g] = {0.08, 0.08};
    }
    gs.color[0] = {1.0, 0.0, 0.5};
    gs.color[1] = {0.0, 1.0, 0.5};
    gs.opacity[0] = 0.6;
    gs.opacity[1] = 0.5;
    const RenderResult r = render(gs, vp);
    const std::size_t px = 8 * 16 + 8;
    for (int c = 0; c < 3; ++c) {
        EXPECT_DOUBLE_EQ(r.image.rgb[px * 3 + c], gs.color[0][c] * 0.6 + gs.color[1][c] * 0.5 * (1.0 - 0.6));
    }
    EXPECT_DOUBLE_EQ(r.mask.alpha[px], 0.6 + 0.5 * 0.4);
}

TEST(Render, YAxisPointsUp) {
    const Viewport vp = unit_viewport();
    GaussianSet gs(1);
    gs.position[0] = {0.5, 0.9}; // near the top of the world square
    gs.scale[0] = {0.03, 0.03};
    gs.color[0] = {1.0, 1.0, 1.0};
    gs.opacity[0] = 0.9;
    const RenderResult r = render(gs, vp);
    EXPECT_GT(r.mask.alpha[1 * 16 + 8], 0.5);
    EXPECT_EQ(r.mask.alpha[14 * 16 + 8], 0.0);
}

TEST(Render, SupportIsLimitedToThreeSigmaBox) {
    const Viewport vp = unit_viewport(32);
    GaussianSet gs(1);
    gs.position[0] = pixel_center(vp, 16, 16);
    gs.scale[0] = {1.0 / 32.0, 1.0 / 32.0}; // one pixel
    gs.color[0] = {1.0, 1.0, 1.0};
    gs.opacity[0] = 0.9;
    const RenderResult r = render(gs, vp);
    for (int v = 0; v < 32; ++v)
        for (int u = 0; u < 32; ++u)
            if (std::abs(u - 16) > 3 || std::abs(v - 16) > 3) EXPECT_EQ(r.mask.alpha[v * 32 + u], 0.0);
    EXPECT_GT(r.mask.alpha[16 * 32 + 19], 0.0);
}

TEST(Render, OutputsStayInUnitRange) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        GaussianSet gs = splatcp::testing::random_gaussians(12, rng, -0.2, 1.2);
        for (std::size_t g = 0; g < gs.size(); ++g) {
            gs.opacity[g] = uniform(rng, 0.0, 1.0);
            gs.color[g] = {uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0), uniform(rng, 0.0, 1.0)};
        }
        const RenderResult r = render(gs, unit_viewport());
        for (double v : r.image.rgb) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        for (double v : r.mask.alpha) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
}

TEST(Render, ClampedAlphaStaysBelowOne) {
    GaussianSet gs(3);
    for (std::size_t g = 0; g < 3; ++g) {
        gs.position[g] = {0.5, 0.5};
        gs.scale[g] = {0.2, 0.2};
        gs.color[g] = {1.0, 1.0, 1.0};
        gs.opacity[g] = 1.0;
    }
    const RenderResult r = render(gs, unit_viewport());
    for (double v : r.mask.alpha) EXPECT_LT(v, 1.0);
}

TEST(Render, TranslationEquivariance) {
    std::mt19937_64 rng(4);
    // Dyadic positions and shift keep every sum exact in binary floating point.
    GaussianSet gs = splatcp::testing::random_gaussians(10, rng);
    for (Vec2 &p : gs.position) p = {std::ldexp(std::round(std::ldexp(p[0], 20)), -20), std::ldexp(std::round(std::ldexp(p[1], 20)), -20)};
    const Viewport vp = unit_viewport();
    const Vec2 shift{0.25, -0.375};
    GaussianSet moved = gs;
    for (Vec2 &p : moved.position) p = {p[0] + shift[0], p[1] + shift[1]};
    Viewport vp2 = vp;
    vp2.origin = {vp.origin[0] + shift[0], vp.origin[1] + shift[1]};
    const RenderResult a = render(gs, vp), b = render(moved, vp2);
    EXPECT_EQ(a.image, b.image);
    EXPECT_EQ(a.mask, b.mask);
}

TEST(Render, DegenerateCovarianceIsJittered) {
    GaussianSet gs(1);
    gs.position[0] = {0.5, 0.5};
    gs.scale[0] = {0.1, 1e-12};
    gs.angle[0] = 0.7;
    gs.color[0] = {1.0, 1.0, 1.0};
    gs.opacity[0] = 0.5;
    const RenderResult r = render(gs, unit_viewport());
    EXPECT_EQ(r.jitter_count, 1u);
    EXPECT_TRUE(all_finite(r.image.rgb));
}

TEST(Render, Deterministic) {
    std::mt19937_64 rng(5);
    const GaussianSet gs = splatcp::testing::random_gaussians(10, rng);
    EXPECT_EQ(render(gs, unit_viewport()).image, render(gs, unit_viewport()).image);
}

TEST(RenderBackward, ZeroUpstreamGivesZero) {
    std::mt19937_64 rng(6);
    const GaussianSet gs = splatcp::testing::random_gaussians(5, rng);
    const GaussianGrads g = render_backward(gs, unit_viewport(), Image(16, 16), AlphaMask(16, 16));
    for (double v : flatten(g)) EXPECT_EQ(v, 0.0);
}

TEST(RenderBackward, MatchesFiniteDifferences) {
    const Viewport vp = unit_viewport();
    for (std::uint64_t seed : {7u, 8u, 9u}) {
        std::mt19937_64 rng(seed);
        GaussianSet gs = splatcp::testing::random_gaussians(10, rng);
        const LinearLoss loss = random_loss(16, rng);
        const GaussianGrads g = render_backward(gs, vp, loss.wi, loss.wm);
        std::vector<double> x = flatten(gs);
        auto f = [&] {
            unflatten(x, gs);
            return loss(gs, vp);
        };
        const std::vector<double> fd = central_diff(x, f);
        unflatten(x, gs);
        EXPECT_LT(rel_diff(flatten(g), fd), 1e-4) << "seed " << seed;
    }
}

TEST(RenderBackward, ClampedGaussianPassesNoGradient) {
    GaussianSet gs(1);
    gs.position[0] = {0.5, 0.5};
    gs.scale[0] = {0.001, 0.001}; // far below a pixel: only the center pixel could see it
    gs.color[0] = {1.0, 1.0, 1.0};
    gs.opacity[0] = 1.0;
    Image gi(16, 16, 1.0);
    const GaussianGrads g = render_backward(gs, unit_viewport(), gi, AlphaMask(16, 16, 1.0));
    for (double v : flatten(g)) EXPECT_TRUE(std::isfinite(v));
}
