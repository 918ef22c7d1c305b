// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/layout.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace splatcp {

namespace {

ParamLayout make_layout(LayoutId id, std::size_t pos, std::size_t scale, std::size_t rot,
                        std::size_t app, std::size_t opa) {
    ParamLayout l;
    l.id = id;
    std::size_t off = 0;
    auto take = [&off](std::size_t n) {
        Block b{off, n};
        off += n;
        return b;
    };
    l.position = take(pos);
    l.scale_log = take(scale);
    l.rotation = take(rot);
    l.appearance = take(app);
    l.opacity_logit = take(opa);
    l.total = off;
    return l;
}

constexpr double kLogitEps = 1e-12;

} // namespace

void ParamLayout::validate() const {
    const Block blocks[] = {position, scale_log, rotation, appearance, opacity_logit};
    std::size_t off = 0;
    for (const Block &b : blocks) {
        if (b.offset != off) throw std::invalid_argument("ParamLayout: blocks must be contiguous");
        off = b.end();
    }
    if (off != total) throw std::invalid_argument("ParamLayout: blocks must cover [0, M)");
    if (id == LayoutId::Volumetric3D && total != 43) {
        throw std::invalid_argument("ParamLayout: 3D layout must have M = 43");
    }
}

ParamLayout layout_2d() { return make_layout(LayoutId::Planar2D, 2, 2, 1, 3, 1); }

ParamLayout layout_3d() { return make_layout(LayoutId::Volumetric3D, 3, 3, 4, 32, 1); }

ParamLayout layout_generic(std::size_t m) {
    // Everything is treated as position-like so it uses the decayed schedule.
    return make_layout(LayoutId::Generic, m, 0, 0, 0, 0);
}

ParamLayout layout_for(LayoutId id, std::size_t m) {
    ParamLayout l;
    switch (id) {
    case LayoutId::Planar2D: l = layout_2d(); break;
    case LayoutId::Volumetric3D: l = layout_3d(); break;
    case LayoutId::Generic: return layout_generic(m);
    default: throw std::invalid_argument("unknown layout id");
    }
    if (l.total != m) {
        throw std::invalid_argument("layout " + std::to_string(static_cast<int>(id)) + " needs M = " +
                                    std::to_string(l.total) + ", got " + std::to_string(m));
    }
    return l;
}

GaussianGrads &GaussianGrads::operator+=(const GaussianGrads &o) {
    if (o.size() != size()) throw std::invalid_argument("GaussianGrads: size mismatch");
    for (std::size_t g = 0; g < size(); ++g) {
        for (int a = 0; a < 2; ++a) {
            position[g][a] += o.position[g][a];
            scale[g][a] += o.scale[g][a];
        }
        angle[g] += o.angle[g];
        for (int c = 0; c < 3; ++c) color[g][c] += o.color[g][c];
        opacity[g] += o.opacity[g];
    }
    return *this;
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double logit(double p) {
    const double q = std::clamp(p, kLogitEps, 1.0 - kLogitEps);
    return std::log(q / (1.0 - q));
}

GaussianSet activate(const Mat &raw, const ParamLayout &layout) {
    if (layout.id != LayoutId::Planar2D || raw.cols != layout.total) {
        throw std::invalid_argument("activate: expected an N_g x 9 slice with the 2D layout");
    }
    GaussianSet gs(raw.rows);
    for (std::size_t g = 0; g < raw.rows; ++g) {
        const auto w = raw.row(g);
        gs.position[g] = {w[layout.position.offset], w[layout.position.offset + 1]};
        gs.scale[g] = {std::exp(w[layout.scale_log.offset]), std::exp(w[layout.scale_log.offset + 1])};
        gs.angle[g] = w[layout.rotation.offset];
        for (int c = 0; c < 3; ++c) gs.color[g][c] = sigmoid(w[layout.appearance.offset + c]);
        gs.opacity[g] = sigmoid(w[layout.opacity_logit.offset]);
    }
    return gs;
}

Mat inverse_activate(const GaussianSet &gs, const ParamLayout &layout) {
    if (layout.id != LayoutId::Planar2D) {
        throw std::invalid_argument("inverse_activate: only the 2D layout maps to a GaussianSet");
    }
    Mat raw(gs.size(), layout.total);
    for (std::size_t g = 0; g < gs.size(); ++g) {
        auto w = raw.row(g);
        w[layout.position.offset] = gs.position[g][0];
        w[layout.position.offset + 1] = gs.position[g][1];
        if (gs.scale[g][0] <= 0.0 || gs.scale[g][1] <= 0.0) {
            throw std::invalid_argument("inverse_activate: scales must be positive");
        }
        w[layout.scale_log.offset] = std::log(gs.scale[g][0]);
        w[layout.scale_log.offset + 1] = std::log(gs.scale[g][1]);
        w[layout.rotation.offset] = gs.angle[g];
        for (int c = 0; c < 3; ++c) w[layout.appearance.offset + c] = logit(gs.color[g][c]);
        w[layout.opacity_logit.offset] = logit(gs.opacity[g]);
    }
    return raw;
}

Mat activation_backward(const Mat &raw, const GaussianGrads &grad, const ParamLayout &layout) {
    if (layout.id != LayoutId::Planar2D || raw.cols != layout.total || grad.size() != raw.rows) {
        throw std::invalid_argument("activation_backward: shapes do not match the 2D layout");
    }
    Mat out(raw.rows, raw.cols);
    for (std::size_t g = 0; g < raw.rows; ++g) {
        const auto w = raw.row(g);
        auto o = out.row(g);
        o[layout.position.offset] = grad.position[g][0];
        o[layout.position.offset + 1] = grad.position[g][1];
        for (int a = 0; a < 2; ++a) {
            o[layout.scale_log.offset + a] = grad.scale[g][a] * std::exp(w[layout.scale_log.offset + a]);
        }
        o[layout.rotation.offset] = grad.angle[g];
        for (int c = 0; c < 3; ++c) {
            const double s = sigmoid(w[layout.appearance.offset + c]);
            o[layout.appearance.offset + c] = grad.color[g][c] * s * (1.0 - s);
        }
        const double s = sigmoid(w[layout.opacity_logit.offset]);
        o[layout.opacity_logit.offset] = grad.opacity[g] * s * (1.0 - s);
    }
    return out;
}

Gaussian3D activate_3d(std::span<const double> w, const ParamLayout &layout) {
    if (layout.id != LayoutId::Volumetric3D || w.size() != layout.total) {
        throw std::invalid_argument("activate_3d: expected a 43-entry row with the 3D layout");
    }
    Gaussian3D out;
    for (int a = 0; a < 3; ++a) {
        out.position[a] = w[layout.position.offset + a];
        out.scale[a] = std::exp(w[layout.scale_log.offset + a]);
    }
    double n2 = 0.0;
    for (int a = 0; a < 4; ++a) n2 += w[layout.rotation.offset + a] * w[layout.rotation.offset + a];
    if (n2 == 0.0) {
        out.rotation = {1.0, 0.0, 0.0, 0.0};
    } else {
        const double n = std::sqrt(n2);
        for (int a = 0; a < 4; ++a) out.rotation[a] = w[layout.rotation.offset + a] / n;
    }
    out.features.assign(w.begin() + static_cast<std::ptrdiff_t>(layout.appearance.offset),
                        w.begin() + static_cast<std::ptrdiff_t>(layout.appearance.end()));
    out.opacity = sigmoid(w[layout.opacity_logit.offset]);
    return out;
}

std::vector<double> activation_backward_3d(std::span<const double> w, const Gaussian3DGrad &grad,
                                           const ParamLayout &layout) {
    if (layout.id != LayoutId::Volumetric3D || w.size() != layout.total ||
        grad.features.size() != layout.appearance.length) {
        throw std::invalid_argument("activation_backward_3d: shapes do not match the 3D layout");
    }
    std::vector<double> out(layout.total, 0.0);
    for (int a = 0; a < 3; ++a) {
        out[layout.position.offset + a] = grad.position[a];
        out[layout.scale_log.offset + a] = grad.scale[a] * std::exp(w[layout.scale_log.offset + a]);
    }
    // d(q/|q|)/dq = (I - q̂ q̂^T) / |q|
    double n2 = 0.0;
    for (int a = 0; a < 4; ++a) n2 += w[layout.rotation.offset + a] * w[layout.rotation.offset + a];
    if (n2 > 0.0) {
        const double n = std::sqrt(n2);
        double dot = 0.0;
        for (int a = 0; a < 4; ++a) dot += grad.rotation[a] * w[layout.rotation.offset + a] / n;
        for (int a = 0; a < 4; ++a) {
            const double qhat = w[layout.rotation.offset + a] / n;
            out[layout.rotation.offset + a] = (grad.rotation[a] - dot * qhat) / n;
        }
    }
    for (std::size_t f = 0; f < layout.appearance.length; ++f) {
        out[layout.appearance.offset + f] = grad.features[f];
    }
    const double s = sigmoid(w[layout.opacity_logit.offset]);
    out[layout.opacity_logit.offset] = grad.opacity * s * (1.0 - s);
    return out;
}

} // namespace splatcp
