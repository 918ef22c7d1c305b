// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/render.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splatcp {

namespace {

struct Splat {
    Vec2 mean;     // pixel space
    Sym2 cov;      // pixel space, jitter included
    Sym2 conic;    // inverse covariance
    Vec2 radius;   // half extent of the support box
};

Splat project(const GaussianSet &gs, std::size_t g, const Viewport &vp, std::size_t &jitter_count) {
    const double k = vp.pixels_per_unit;
    Splat s;
    s.mean = {(gs.position[g][0] - vp.origin[0]) * k, (vp.origin[1] - gs.position[g][1]) * k};
    const Sym2 w = covariance2d(gs.scale[g], gs.angle[g]);
    // y flips between world and image, which negates the off-diagonal.
    s.cov = {k * k * w.xx, -k * k * w.xy, k * k * w.yy};
    double det = s.cov.xx * s.cov.yy - s.cov.xy * s.cov.xy;
    if (!(det > 1e-14 * s.cov.xx * s.cov.yy) || !(det > 0.0)) {
        s.cov.xx += kCovarianceJitter;
        s.cov.yy += kCovarianceJitter;
        det = s.cov.xx * s.cov.yy - s.cov.xy * s.cov.xy;
        ++jitter_count;
    }
    s.conic = {s.cov.yy / det, -s.cov.xy / det, s.cov.xx / det};
    s.radius = {kSupportSigmas * std::sqrt(s.cov.xx), kSupportSigmas * std::sqrt(s.cov.yy)};
    return s;
}

std::vector<Splat> project_all(const GaussianSet &gs, const Viewport &vp, std::size_t &jitter_count) {
    std::vector<Splat> out;
    out.reserve(gs.size());
    for (std::size_t g = 0; g < gs.size(); ++g) out.push_back(project(gs, g, vp, jitter_count));
    return out;
}

void check_set(const GaussianSet &gs) {
    const std::size_t n = gs.size();
    if (gs.scale.size() != n || gs.angle.size() != n || gs.color.size() != n || gs.opacity.size() != n) {
        throw std::invalid_argument("GaussianSet: field lengths differ");
    }
    for (std::size_t g = 0; g < n; ++g) {
        if (!(gs.scale[g][0] > 0.0) || !(gs.scale[g][1] > 0.0)) {
            throw std::invalid_argument("render: non-positive Gaussian scale");
        }
    }
}

struct Contribution {
    std::size_t g;
    double dx, dy;
    double gauss;
    double alpha;      // after clamp
    double transmit;   // transmittance in front of this Gaussian
    bool clamped;
};

// Composites one pixel and records each contributing Gaussian when `trace` is set.
template <bool Trace>
void composite_pixel(const GaussianSet &gs, const std::vector<Splat> &splats, double px, double py,
                     double *rgb, double &mask, std::vector<Contribution> *trace) {
    double T = 1.0;
    double c[3] = {0.0, 0.0, 0.0};
    for (std::size_t g = 0; g < splats.size(); ++g) {
        const Splat &s = splats[g];
        const double dx = px - s.mean[0];
        const double dy = py - s.mean[1];
        if (std::abs(dx) > s.radius[0] || std::abs(dy) > s.radius[1]) continue;
        const double power = -0.5 * (s.conic.xx * dx * dx + 2.0 * s.conic.xy * dx * dy + s.conic.yy * dy * dy);
        const double G = std::exp(power);
        const double raw = gs.opacity[g] * G;
        const bool clamped = raw > kAlphaMax;
        const double a = clamped ? kAlphaMax : std::max(raw, 0.0);
        for (int ch = 0; ch < 3; ++ch) c[ch] += gs.color[g][ch] * a * T;
        if constexpr (Trace) trace->push_back({g, dx, dy, G, a, T, clamped});
        T *= (1.0 - a);
    }
    for (int ch = 0; ch < 3; ++ch) rgb[ch] = c[ch];
    mask = 1.0 - T;
}

} // namespace

void Viewport::validate() const {
    if (width <= 0 || height <= 0) throw std::invalid_argument("Viewport: dimensions must be positive");
    if (!(pixels_per_unit > 0.0) || !std::isfinite(pixels_per_unit)) {
        throw std::invalid_argument("Viewport: pixels_per_unit must be positive and finite");
    }
}

Sym2 covariance2d(Vec2 scale, double angle) {
    if (!(scale[0] > 0.0) || !(scale[1] > 0.0)) {
        throw std::invalid_argument("covariance2d: scales must be positive");
    }
    const double c = std::cos(angle), s = std::sin(angle);
    const double a = scale[0] * scale[0], b = scale[1] * scale[1];
    return {c * c * a + s * s * b, c * s * (a - b), s * s * a + c * c * b};
}

CovarianceGrad covariance2d_backward(Vec2 scale, double angle, const Sym2 &g) {
    const double c = std::cos(angle), s = std::sin(angle);
    const double a = scale[0] * scale[0], b = scale[1] * scale[1];
    const double ga = g.xx * c * c + g.xy * c * s + g.yy * s * s;
    const double gb = g.xx * s * s - g.xy * c * s + g.yy * c * c;
    CovarianceGrad out;
    out.scale = {2.0 * scale[0] * ga, 2.0 * scale[1] * gb};
    out.angle = (a - b) * (-2.0 * c * s * g.xx + (c * c - s * s) * g.xy + 2.0 * c * s * g.yy);
    return out;
}

RenderResult render(const GaussianSet &gs, const Viewport &vp) {
    vp.validate();
    check_set(gs);
    RenderResult out;
    out.image = Image(vp.width, vp.height);
    out.mask = AlphaMask(vp.width, vp.height);
    const auto splats = project_all(gs, vp, out.jitter_count);
    for (int v = 0; v < vp.height; ++v) {
        for (int u = 0; u < vp.width; ++u) {
            const std::size_t p = static_cast<std::size_t>(v) * vp.width + u;
            composite_pixel<false>(gs, splats, u + 0.5, v + 0.5, &out.image.rgb[3 * p], out.mask.alpha[p],
                                   nullptr);
        }
    }
    return out;
}

GaussianGrads render_backward(const GaussianSet &gs, const Viewport &vp, const Image &grad_image,
                              const AlphaMask &grad_mask) {
    vp.validate();
    check_set(gs);
    if (grad_image.width != vp.width || grad_image.height != vp.height ||
        grad_mask.width != vp.width || grad_mask.height != vp.height) {
        throw std::invalid_argument("render_backward: gradient shapes do not match the viewport");
    }
    std::size_t jitter = 0;
    const auto splats = project_all(gs, vp, jitter);
    const std::size_t n = gs.size();

    GaussianGrads grads(n);
    std::vector<Vec2> g_mean(n, Vec2{0.0, 0.0});
    std::vector<Sym2> g_conic(n);

    std::vector<Contribution> trace;
    for (int v = 0; v < vp.height; ++v) {
        for (int u = 0; u < vp.width; ++u) {
            const std::size_t p = static_cast<std::size_t>(v) * vp.width + u;
            const double *gC = &grad_image.rgb[3 * p];
            const double gM = grad_mask.alpha[p];
            if (gC[0] == 0.0 && gC[1] == 0.0 && gC[2] == 0.0 && gM == 0.0) continue;

            trace.clear();
            double rgb[3], mask;
            composite_pixel<true>(gs, splats, u + 0.5, v + 0.5, rgb, mask, &trace);
            const double T_final = 1.0 - mask;

            // Running sum over Gaussians behind the current one of (gC . c_k) w_k.
            double behind = 0.0;
            for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
                const Contribution &ct = *it;
                const std::size_t g = ct.g;
                const double weight = ct.alpha * ct.transmit;
                double gc_dot = 0.0;
                for (int ch = 0; ch < 3; ++ch) {
                    grads.color[g][ch] += gC[ch] * weight;
                    gc_dot += gC[ch] * gs.color[g][ch];
                }
                const double one_minus = 1.0 - ct.alpha;
                const double g_alpha = ct.transmit * gc_dot - behind / one_minus + gM * T_final / one_minus;
                behind += gc_dot * weight;
                if (ct.clamped) continue;

                grads.opacity[g] += g_alpha * ct.gauss;
                const double g_power = g_alpha * gs.opacity[g] * ct.gauss;
                const Sym2 &P = splats[g].conic;
                // d(power)/d(mean) = P d, with d = pixel - mean
                g_mean[g][0] += g_power * (P.xx * ct.dx + P.xy * ct.dy);
                g_mean[g][1] += g_power * (P.xy * ct.dx + P.yy * ct.dy);
                g_conic[g].xx += g_power * (-0.5 * ct.dx * ct.dx);
                g_conic[g].xy += g_power * (-ct.dx * ct.dy);
                g_conic[g].yy += g_power * (-0.5 * ct.dy * ct.dy);
            }
        }
    }

    const double k = vp.pixels_per_unit;
    for (std::size_t g = 0; g < n; ++g) {
        const Sym2 &S = splats[g].cov;
        const Sym2 &P = splats[g].conic;
        const Sym2 &gP = g_conic[g];
        // conic = adj(cov) / det
        const double det = S.xx * S.yy - S.xy * S.xy;
        const double g_det = -(gP.xx * P.xx + gP.xy * P.xy + gP.yy * P.yy) / det;
        const Sym2 g_cov_px{gP.yy / det + g_det * S.yy, -gP.xy / det - 2.0 * g_det * S.xy,
                            gP.xx / det + g_det * S.xx};
        const Sym2 g_cov_world{k * k * g_cov_px.xx, -k * k * g_cov_px.xy, k * k * g_cov_px.yy};
        const CovarianceGrad cg = covariance2d_backward(gs.scale[g], gs.angle[g], g_cov_world);
        grads.scale[g][0] += cg.scale[0];
        grads.scale[g][1] += cg.scale[1];
        grads.angle[g] += cg.angle;
        grads.position[g][0] += k * g_mean[g][0];
        grads.position[g][1] += -k * g_mean[g][1];
    }
    return grads;
}

} // namespace splatcp
