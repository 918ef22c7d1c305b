// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/deform.hpp>
#include <splatcp/render.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace splatcp {

namespace {

constexpr double kZeroLength = 1e-12;

double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

Rigid2D rotation_about(double angle, Vec2 pivot) {
    Rigid2D r;
    if (angle != 0.0) {
        const double c = std::cos(angle), s = std::sin(angle);
        r.m00 = c;
        r.m01 = -s;
        r.m10 = s;
        r.m11 = c;
    }
    r.t = {pivot[0] - (r.m00 * pivot[0] + r.m01 * pivot[1]), pivot[1] - (r.m10 * pivot[0] + r.m11 * pivot[1])};
    return r;
}

// a ∘ b
Rigid2D compose(const Rigid2D &a, const Rigid2D &b) {
    Rigid2D r;
    r.m00 = a.m00 * b.m00 + a.m01 * b.m10;
    r.m01 = a.m00 * b.m01 + a.m01 * b.m11;
    r.m10 = a.m10 * b.m00 + a.m11 * b.m10;
    r.m11 = a.m10 * b.m01 + a.m11 * b.m11;
    r.t = a.apply(b.t);
    return r;
}

struct Blend {
    std::vector<double> w;
    Rigid2D T;
};

Blend blend(Vec2 p, const BoneTransforms &bt, const Skeleton2D &sk) {
    Blend out;
    out.w = skinning_weights(p, sk);
    const Rigid2D &ref = bt[0];
    out.T = ref;
    for (std::size_t b = 1; b < bt.size(); ++b) {
        const double w = out.w[b];
        out.T.m00 += w * (bt[b].m00 - ref.m00);
        out.T.m01 += w * (bt[b].m01 - ref.m01);
        out.T.m10 += w * (bt[b].m10 - ref.m10);
        out.T.m11 += w * (bt[b].m11 - ref.m11);
        out.T.t[0] += w * (bt[b].t[0] - ref.t[0]);
        out.T.t[1] += w * (bt[b].t[1] - ref.t[1]);
    }
    return out;
}

void check_transforms(const BoneTransforms &bt, const Skeleton2D &sk) {
    if (bt.size() != sk.size() || sk.size() == 0) {
        throw std::invalid_argument("lbs: need one transform per bone");
    }
}

double frob_sym(const Sym2 &d) { return std::sqrt(d.xx * d.xx + 2.0 * d.xy * d.xy + d.yy * d.yy); }

} // namespace

Skeleton2D::Skeleton2D(std::vector<Bone> bones) : bones_(std::move(bones)) {
    const std::size_t n = bones_.size();
    if (n == 0) throw std::invalid_argument("Skeleton2D: need at least one bone");
    if (bones_[0].parent != -1) throw std::invalid_argument("Skeleton2D: bone 0 must be the root");
    for (std::size_t b = 0; b < n; ++b) {
        const Bone &bone = bones_[b];
        if (!(bone.length > 0.0)) throw std::invalid_argument("Skeleton2D: bone lengths must be positive");
        if (b > 0 && (bone.parent < 0 || static_cast<std::size_t>(bone.parent) >= n)) {
            throw std::invalid_argument("Skeleton2D: bone " + std::to_string(b) + " has an invalid parent");
        }
    }
    // Every chain must reach the root within n steps.
    std::vector<int> depth(n, -1);
    depth[0] = 0;
    for (std::size_t b = 1; b < n; ++b) {
        std::size_t cur = b;
        std::size_t steps = 0;
        std::vector<std::size_t> chain;
        while (depth[cur] < 0) {
            chain.push_back(cur);
            cur = static_cast<std::size_t>(bones_[cur].parent);
            if (++steps > n) throw std::invalid_argument("Skeleton2D: parent indices form a cycle");
        }
        int d = depth[cur];
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) depth[*it] = ++d;
    }
    order_.resize(n);
    for (std::size_t b = 0; b < n; ++b) order_[b] = b;
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return depth[a] < depth[b]; });
}

Vec2 Skeleton2D::segment_end(std::size_t b) const {
    const Bone &bone = bones_[b];
    return {bone.origin[0] + bone.length * std::cos(bone.rest_angle),
            bone.origin[1] + bone.length * std::sin(bone.rest_angle)};
}

Skeleton2D make_stick_figure(std::size_t n_bones) {
    if (n_bones < 1 || n_bones > 9) {
        throw std::invalid_argument("make_stick_figure: supports 1..9 bones");
    }
    constexpr double pi = std::numbers::pi;
    // torso from hip (0,-0.3) up to neck (0,0.4)
    std::vector<Bone> all = {
        {-1, {0.0, -0.3}, 0.7, pi / 2},          // torso
        {0, {0.0, 0.3}, 0.4, pi - 0.5},          // left upper arm
        {0, {0.0, 0.3}, 0.4, 0.5},               // right upper arm
        {0, {0.0, -0.3}, 0.45, -pi / 2 - 0.25},  // left thigh
        {0, {0.0, -0.3}, 0.45, -pi / 2 + 0.25},  // right thigh
    };
    auto child_of = [&](int parent, double length) {
        const Bone &p = all[static_cast<std::size_t>(parent)];
        Bone c;
        c.parent = parent;
        c.origin = {p.origin[0] + p.length * std::cos(p.rest_angle), p.origin[1] + p.length * std::sin(p.rest_angle)};
        c.length = length;
        c.rest_angle = p.rest_angle;
        return c;
    };
    all.push_back(child_of(1, 0.35));
    all.push_back(child_of(2, 0.35));
    all.push_back(child_of(3, 0.4));
    all.push_back(child_of(4, 0.4));
    all.resize(n_bones);
    return Skeleton2D(std::move(all));
}

BoneTransforms forward_kinematics(const Skeleton2D &sk, const Pose &pose) {
    if (pose.angles.size() != sk.size()) {
        throw std::invalid_argument("forward_kinematics: pose has " + std::to_string(pose.angles.size()) +
                                    " angles for " + std::to_string(sk.size()) + " bones");
    }
    for (double a : pose.angles)
        if (!std::isfinite(a)) throw std::invalid_argument("forward_kinematics: non-finite pose angle");
    BoneTransforms out(sk.size());
    for (std::size_t b : sk.topo_order()) {
        const Bone &bone = sk.bone(b);
        const Rigid2D local = rotation_about(pose.angles[b], bone.origin);
        if (bone.parent < 0) {
            out[b] = local;
            out[b].t[0] += pose.root_translation[0];
            out[b].t[1] += pose.root_translation[1];
        } else {
            out[b] = compose(out[static_cast<std::size_t>(bone.parent)], local);
        }
    }
    return out;
}

double segment_distance(Vec2 p, const Skeleton2D &sk, std::size_t b, Vec2 *grad) {
    const Bone &bone = sk.bone(b);
    const Vec2 dir{std::cos(bone.rest_angle), std::sin(bone.rest_angle)};
    const Vec2 rel{p[0] - bone.origin[0], p[1] - bone.origin[1]};
    const double t = std::clamp(rel[0] * dir[0] + rel[1] * dir[1], 0.0, bone.length);
    const Vec2 diff{rel[0] - t * dir[0], rel[1] - t * dir[1]};
    const double d = std::hypot(diff[0], diff[1]);
    if (grad) {
        if (d > kZeroLength) {
            *grad = {diff[0] / d, diff[1] / d};
        } else {
            *grad = {0.0, 0.0};
        }
    }
    return d;
}

std::vector<double> skinning_weights(Vec2 p, const Skeleton2D &sk, double tau) {
    const std::size_t n = sk.size();
    std::vector<double> z(n);
    for (std::size_t b = 0; b < n; ++b) z[b] = -segment_distance(p, sk, b) / tau;
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double &v : z) {
        v = std::exp(v - zmax);
        sum += v;
    }
    for (double &v : z) v /= sum;
    return z;
}

GaussianSet lbs_apply(const GaussianSet &canonical, const BoneTransforms &bt, const Skeleton2D &sk) {
    check_transforms(bt, sk);
    GaussianSet out = canonical;
    for (std::size_t g = 0; g < canonical.size(); ++g) {
        const Blend bl = blend(canonical.position[g], bt, sk);
        out.position[g] = bl.T.apply(canonical.position[g]);
        out.angle[g] = canonical.angle[g] + std::atan2(bl.T.m10, bl.T.m00);
    }
    return out;
}

GaussianGrads lbs_backward(const GaussianSet &canonical, const BoneTransforms &bt, const Skeleton2D &sk,
                           const GaussianGrads &grad_observed) {
    check_transforms(bt, sk);
    if (grad_observed.size() != canonical.size()) {
        throw std::invalid_argument("lbs_backward: gradient count does not match the Gaussian count");
    }
    GaussianGrads out = grad_observed;
    const std::size_t nb = sk.size();
    std::vector<double> gw(nb);
    std::vector<Vec2> dgrad(nb);
    for (std::size_t g = 0; g < canonical.size(); ++g) {
        const Vec2 p = canonical.position[g];
        const Blend bl = blend(p, bt, sk);
        const Rigid2D &T = bl.T;
        const Vec2 go = grad_observed.position[g];
        const double gtheta = grad_observed.angle[g];

        // Gradient on the blended 2x3 matrix.
        double gA00 = go[0] * p[0], gA01 = go[0] * p[1];
        double gA10 = go[1] * p[0], gA11 = go[1] * p[1];
        const double r2 = T.m00 * T.m00 + T.m10 * T.m10;
        gA00 += gtheta * (-T.m10 / r2);
        gA10 += gtheta * (T.m00 / r2);

        Vec2 gp{T.m00 * go[0] + T.m10 * go[1], T.m01 * go[0] + T.m11 * go[1]};

        const Rigid2D &ref = bt[0];
        double wg = 0.0;
        for (std::size_t b = 0; b < nb; ++b) {
            gw[b] = gA00 * (bt[b].m00 - ref.m00) + gA01 * (bt[b].m01 - ref.m01) + gA10 * (bt[b].m10 - ref.m10) +
                    gA11 * (bt[b].m11 - ref.m11) + go[0] * (bt[b].t[0] - ref.t[0]) + go[1] * (bt[b].t[1] - ref.t[1]);
            wg += bl.w[b] * gw[b];
        }
        for (std::size_t b = 0; b < nb; ++b) {
            const double gz = bl.w[b] * (gw[b] - wg);
            if (gz == 0.0) continue;
            Vec2 dd;
            segment_distance(p, sk, b, &dd);
            gp[0] += gz * (-dd[0] / kSkinTemperature);
            gp[1] += gz * (-dd[1] / kSkinTemperature);
        }
        out.position[g] = gp;
        out.angle[g] = gtheta;
    }
    return out;
}

std::vector<Edge> build_knn(const std::vector<Vec2> &positions, std::size_t k) {
    const std::size_t n = positions.size();
    const std::size_t kk = n == 0 ? 0 : std::min(k, n - 1);
    std::vector<Edge> edges;
    edges.reserve(n * kk);
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t a = 0; a < n; ++a) {
        cand.clear();
        for (std::size_t b = 0; b < n; ++b) {
            if (b == a) continue;
            const double dx = positions[a][0] - positions[b][0];
            const double dy = positions[a][1] - positions[b][1];
            cand.emplace_back(dx * dx + dy * dy, b);
        }
        std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(kk), cand.end());
        for (std::size_t q = 0; q < kk; ++q) edges.emplace_back(a, cand[q].second);
    }
    return edges;
}

const std::vector<Edge> &KnnCache::edges(const std::vector<Vec2> &positions) {
    bool rebuild = anchor_.size() != positions.size();
    if (!rebuild && !positions.empty()) {
        double ss = 0.0;
        for (std::size_t g = 0; g < positions.size(); ++g) {
            const double dx = positions[g][0] - anchor_[g][0];
            const double dy = positions[g][1] - anchor_[g][1];
            ss += dx * dx + dy * dy;
        }
        rebuild = std::sqrt(ss / static_cast<double>(positions.size())) > rebuild_rms_;
    }
    if (rebuild) {
        anchor_ = positions;
        edges_ = build_knn(positions, k_);
        ++rebuilds_;
    }
    return edges_;
}

IsoLosses iso_losses(const GaussianSet &canonical, const GaussianSet &observed, const std::vector<Edge> &edges) {
    const std::size_t n = canonical.size();
    if (observed.size() != n) throw std::invalid_argument("iso_losses: Gaussian counts differ");
    IsoLosses out;
    out.isopos_canonical = GaussianGrads(n);
    out.isopos_observed = GaussianGrads(n);
    out.isocov_canonical = GaussianGrads(n);
    out.isocov_observed = GaussianGrads(n);

    std::vector<Sym2> cov_c(n), cov_o(n);
    for (std::size_t g = 0; g < n; ++g) {
        cov_c[g] = covariance2d(canonical.scale[g], canonical.angle[g]);
        cov_o[g] = covariance2d(observed.scale[g], observed.angle[g]);
    }
    std::vector<Sym2> gcov_c(n), gcov_o(n);

    std::size_t used = 0;
    for (const auto &[a, b] : edges) {
        if (a >= n || b >= n) throw std::invalid_argument("iso_losses: edge index out of range");
        const Vec2 dc{canonical.position[a][0] - canonical.position[b][0],
                      canonical.position[a][1] - canonical.position[b][1]};
        const double lc = std::hypot(dc[0], dc[1]);
        if (lc < kZeroLength) {
            ++out.skipped_edges;
            continue;
        }
        ++used;
        const Vec2 dob{observed.position[a][0] - observed.position[b][0],
                       observed.position[a][1] - observed.position[b][1]};
        const double lo = std::hypot(dob[0], dob[1]);
        const double diff = lc - lo;
        out.isopos += std::abs(diff);
        const double s = sign(diff);
        for (int ax = 0; ax < 2; ++ax) {
            const double gc = s * dc[ax] / lc;
            out.isopos_canonical.position[a][ax] += gc;
            out.isopos_canonical.position[b][ax] -= gc;
            if (lo >= kZeroLength) {
                const double go = -s * dob[ax] / lo;
                out.isopos_observed.position[a][ax] += go;
                out.isopos_observed.position[b][ax] -= go;
            }
        }

        const Sym2 Dc{cov_c[a].xx - cov_c[b].xx, cov_c[a].xy - cov_c[b].xy, cov_c[a].yy - cov_c[b].yy};
        const Sym2 Do{cov_o[a].xx - cov_o[b].xx, cov_o[a].xy - cov_o[b].xy, cov_o[a].yy - cov_o[b].yy};
        const double fc = frob_sym(Dc), fo = frob_sym(Do);
        const double cdiff = fo - fc;
        out.isocov += std::abs(cdiff);
        const double cs = sign(cdiff);
        if (fo >= kZeroLength) {
            const Sym2 gd{cs * Do.xx / fo, cs * 2.0 * Do.xy / fo, cs * Do.yy / fo};
            gcov_o[a].xx += gd.xx; gcov_o[a].xy += gd.xy; gcov_o[a].yy += gd.yy;
            gcov_o[b].xx -= gd.xx; gcov_o[b].xy -= gd.xy; gcov_o[b].yy -= gd.yy;
        }
        if (fc >= kZeroLength) {
            const Sym2 gd{-cs * Dc.xx / fc, -cs * 2.0 * Dc.xy / fc, -cs * Dc.yy / fc};
            gcov_c[a].xx += gd.xx; gcov_c[a].xy += gd.xy; gcov_c[a].yy += gd.yy;
            gcov_c[b].xx -= gd.xx; gcov_c[b].xy -= gd.xy; gcov_c[b].yy -= gd.yy;
        }
    }
    if (used == 0) return out;

    const double inv = 1.0 / static_cast<double>(used);
    out.isopos *= inv;
    out.isocov *= inv;
    for (std::size_t g = 0; g < n; ++g) {
        for (int ax = 0; ax < 2; ++ax) {
            out.isopos_canonical.position[g][ax] *= inv;
            out.isopos_observed.position[g][ax] *= inv;
        }
        const Sym2 gc{gcov_c[g].xx * inv, gcov_c[g].xy * inv, gcov_c[g].yy * inv};
        const Sym2 go{gcov_o[g].xx * inv, gcov_o[g].xy * inv, gcov_o[g].yy * inv};
        const CovarianceGrad cgc = covariance2d_backward(canonical.scale[g], canonical.angle[g], gc);
        const CovarianceGrad cgo = covariance2d_backward(observed.scale[g], observed.angle[g], go);
        out.isocov_canonical.scale[g] = cgc.scale;
        out.isocov_canonical.angle[g] = cgc.angle;
        out.isocov_observed.scale[g] = cgo.scale;
        out.isocov_observed.angle[g] = cgo.angle;
    }
    return out;
}

} // namespace splatcp
