// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/losses.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace splatcp {

namespace {

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_same(const Image &a, const Image &b) {
    if (a.width != b.width || a.height != b.height || a.rgb.size() != b.rgb.size()) {
        throw std::invalid_argument("image shapes differ");
    }
}

void add_scaled(GaussianGrads &dst, const GaussianGrads &src, double s) {
    for (std::size_t g = 0; g < dst.size(); ++g) {
        for (int a = 0; a < 2; ++a) {
            dst.position[g][a] += s * src.position[g][a];
            dst.scale[g][a] += s * src.scale[g][a];
        }
        dst.angle[g] += s * src.angle[g];
        for (int c = 0; c < 3; ++c) dst.color[g][c] += s * src.color[g][c];
        dst.opacity[g] += s * src.opacity[g];
    }
}

} // namespace

void LossWeights::validate() const {
    if (!(l1 >= 0.0) || !(mask >= 0.0) || !(isopos >= 0.0) || !(isocov >= 0.0)) {
        throw std::invalid_argument("LossWeights: weights must be non-negative");
    }
}

LossResult total_loss(const Image &pred, const AlphaMask &pred_mask, const Image &target,
                      const AlphaMask &target_mask, const DeformPair &deform, const LossWeights &w) {
    w.validate();
    check_same(pred, target);
    if (pred_mask.width != pred.width || pred_mask.height != pred.height || target_mask.width != pred.width ||
        target_mask.height != pred.height || pred_mask.alpha.size() != target_mask.alpha.size()) {
        throw std::invalid_argument("total_loss: mask shapes do not match the images");
    }
    LossResult out;
    out.grad_image = Image(pred.width, pred.height);
    out.grad_mask = AlphaMask(pred.width, pred.height);

    const double n_rgb = static_cast<double>(pred.rgb.size());
    for (std::size_t n = 0; n < pred.rgb.size(); ++n) {
        const double d = pred.rgb[n] - target.rgb[n];
        out.l1 += std::abs(d);
        out.grad_image.rgb[n] = w.l1 * sign(d) / n_rgb;
    }
    out.l1 /= n_rgb;

    const double n_px = static_cast<double>(pred_mask.alpha.size());
    for (std::size_t n = 0; n < pred_mask.alpha.size(); ++n) {
        const double d = pred_mask.alpha[n] - target_mask.alpha[n];
        out.mask += std::abs(d);
        out.grad_mask.alpha[n] = w.mask * sign(d) / n_px;
    }
    out.mask /= n_px;

    out.total = w.l1 * out.l1 + w.mask * out.mask;

    if (deform.canonical && deform.observed && deform.edges) {
        const std::size_t ng = deform.canonical->size();
        out.grad_canonical = GaussianGrads(ng);
        out.grad_observed = GaussianGrads(ng);
        if (w.isopos > 0.0 || w.isocov > 0.0) {
            const IsoLosses iso = iso_losses(*deform.canonical, *deform.observed, *deform.edges);
            out.isopos = iso.isopos;
            out.isocov = iso.isocov;
            out.total += w.isopos * iso.isopos + w.isocov * iso.isocov;
            add_scaled(out.grad_canonical, iso.isopos_canonical, w.isopos);
            add_scaled(out.grad_canonical, iso.isocov_canonical, w.isocov);
            add_scaled(out.grad_observed, iso.isopos_observed, w.isopos);
            add_scaled(out.grad_observed, iso.isocov_observed, w.isocov);
        }
    }
    return out;
}

double mse(const Image &a, const Image &b) {
    check_same(a, b);
    if (a.rgb.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t n = 0; n < a.rgb.size(); ++n) {
        const double d = a.rgb[n] - b.rgb[n];
        s += d * d;
    }
    return s / static_cast<double>(a.rgb.size());
}

double psnr_from_mse(double m) { return 10.0 * std::log10(1.0 / std::max(m, kMseFloor)); }

double psnr(const Image &a, const Image &b) { return psnr_from_mse(mse(a, b)); }

double l1_distance(const Image &a, const Image &b) {
    check_same(a, b);
    if (a.rgb.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t n = 0; n < a.rgb.size(); ++n) s += std::abs(a.rgb[n] - b.rgb[n]);
    return s / static_cast<double>(a.rgb.size());
}

} // namespace splatcp
