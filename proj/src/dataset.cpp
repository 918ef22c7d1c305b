// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/dataset.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace splatcp {

namespace {

// Uniform doubles from the raw engine so the stream does not depend on the
// standard library's distribution implementations.
double uniform(std::mt19937_64 &rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

struct Template {
    std::vector<std::size_t> bone;
    std::vector<double> along;   // fraction of bone length
    std::vector<double> side;    // [-1, 1] across the bone
    std::vector<double> pattern; // [-1, 1] along-shift pattern
    std::vector<double> shade;   // [-1, 1] color shading pattern
    std::vector<double> stretch; // [-1, 1] scale pattern
};

Template make_template(const Skeleton2D &sk, std::size_t n, std::mt19937_64 &rng) {
    Template t;
    double total = 0.0;
    for (const Bone &b : sk.bones()) total += b.length;
    // Gaussians per bone proportional to length, at least one each when possible.
    std::vector<std::size_t> count(sk.size(), 0);
    std::size_t assigned = 0;
    for (std::size_t b = 0; b < sk.size(); ++b) {
        count[b] = static_cast<std::size_t>(std::floor(static_cast<double>(n) * sk.bone(b).length / total));
        assigned += count[b];
    }
    for (std::size_t b = 0; assigned < n; b = (b + 1) % sk.size(), ++assigned) ++count[b];
    for (std::size_t b = 0; b < sk.size(); ++b) {
        for (std::size_t q = 0; q < count[b]; ++q) {
            t.bone.push_back(b);
            t.along.push_back((static_cast<double>(q) + 0.5) / static_cast<double>(count[b]));
            t.side.push_back(q % 2 == 0 ? uniform(rng, 0.2, 1.0) : -uniform(rng, 0.2, 1.0));
            t.pattern.push_back(uniform(rng, -1.0, 1.0));
            t.shade.push_back(uniform(rng, -1.0, 1.0));
            t.stretch.push_back(uniform(rng, -1.0, 1.0));
        }
    }
    return t;
}

GaussianSet make_identity(const Template &t, const Skeleton2D &sk, std::mt19937_64 &rng) {
    const double torso_width = uniform(rng, 0.06, 0.14);
    const double limb_width = uniform(rng, 0.03, 0.08);
    const double shift = uniform(rng, -0.04, 0.04);
    const double along_scale = uniform(rng, 0.05, 0.08);
    const double across_scale = uniform(rng, 0.035, 0.06);
    const double opacity = uniform(rng, 0.7, 0.9);
    const Vec3 torso_color{uniform(rng, 0.15, 0.9), uniform(rng, 0.15, 0.9), uniform(rng, 0.15, 0.9)};
    const Vec3 limb_color{uniform(rng, 0.15, 0.9), uniform(rng, 0.15, 0.9), uniform(rng, 0.15, 0.9)};
    const double shade_amp = uniform(rng, 0.0, 0.1);

    const std::size_t n = t.bone.size();
    GaussianSet gs(n);
    for (std::size_t g = 0; g < n; ++g) {
        const Bone &bone = sk.bone(t.bone[g]);
        const Vec2 dir{std::cos(bone.rest_angle), std::sin(bone.rest_angle)};
        const Vec2 normal{-dir[1], dir[0]};
        const double width = t.bone[g] == 0 ? torso_width : limb_width;
        const double s = t.along[g] * bone.length + shift * t.pattern[g];
        const double c = t.side[g] * width;
        gs.position[g] = {bone.origin[0] + s * dir[0] + c * normal[0], bone.origin[1] + s * dir[1] + c * normal[1]};
        gs.scale[g] = {along_scale * (1.0 + 0.2 * t.stretch[g]), across_scale};
        gs.angle[g] = bone.rest_angle;
        const Vec3 &base = t.bone[g] == 0 ? torso_color : limb_color;
        for (int ch = 0; ch < 3; ++ch) gs.color[g][ch] = std::clamp(base[ch] + shade_amp * t.shade[g], 0.05, 0.95);
        gs.opacity[g] = opacity;
    }
    return gs;
}

Pose sample_pose(std::size_t bones, double lo, double hi, bool symmetric_band, std::mt19937_64 &rng) {
    Pose p;
    p.angles.resize(bones);
    for (double &a : p.angles) {
        if (symmetric_band) {
            a = uniform(rng, -hi, hi);
        } else {
            const double mag = uniform(rng, lo, hi);
            a = (rng() & 1u) ? mag : -mag;
        }
    }
    return p;
}

} // namespace

void DatasetSpec::validate() const {
    if (identities == 0) throw std::invalid_argument("dataset: identities must be >= 1");
    if (gaussians == 0) throw std::invalid_argument("dataset: gaussians must be >= 1");
    if (bones < 1 || bones > 9) throw std::invalid_argument("dataset: bones must be in [1, 9]");
    if (image_size < 4 || image_size > 4096) throw std::invalid_argument("dataset: image size must be in [4, 4096]");
    if (train_poses == 0) throw std::invalid_argument("dataset: need at least one training pose");
    if (!(train_angle_max >= 0.0) || !(heldout_angle_min > train_angle_max) ||
        !(heldout_angle_max >= heldout_angle_min) || heldout_angle_max > std::numbers::pi) {
        throw std::invalid_argument("dataset: held-out angle band must lie strictly outside the training band");
    }
}

Viewport default_viewport(int image_size) {
    Viewport vp;
    vp.width = image_size;
    vp.height = image_size;
    vp.origin = {-1.2, 1.0};
    vp.pixels_per_unit = static_cast<double>(image_size) / 2.4;
    return vp;
}

Frame render_frame(const GaussianSet &canonical, const Scene &scene, const Pose &pose) {
    const BoneTransforms bt = forward_kinematics(scene.skeleton, pose);
    const RenderResult rr = render(lbs_apply(canonical, bt, scene.skeleton), scene.viewport);
    return {pose, rr.image, rr.mask};
}

SyntheticDataset generate_dataset(const DatasetSpec &spec, std::uint64_t seed) {
    spec.validate();
    SyntheticDataset ds;
    ds.spec = spec;
    ds.seed = seed;
    ds.scene.skeleton = make_stick_figure(spec.bones);
    ds.scene.viewport = default_viewport(spec.image_size);

    std::mt19937_64 rng(seed);
    const Template tmpl = make_template(ds.scene.skeleton, spec.gaussians, rng);
    for (std::size_t i = 0; i < spec.identities; ++i) {
        IdentityData id;
        id.ground_truth = make_identity(tmpl, ds.scene.skeleton, rng);
        for (std::size_t f = 0; f < spec.train_poses; ++f) {
            const Pose p = sample_pose(spec.bones, 0.0, spec.train_angle_max, true, rng);
            id.train.push_back(render_frame(id.ground_truth, ds.scene, p));
        }
        for (std::size_t f = 0; f < spec.heldout_poses; ++f) {
            const Pose p = sample_pose(spec.bones, spec.heldout_angle_min, spec.heldout_angle_max, false, rng);
            id.held_out.push_back(render_frame(id.ground_truth, ds.scene, p));
        }
        ds.identities.push_back(std::move(id));
    }
    return ds;
}

GaussianSet seed_gaussians(const SyntheticDataset &ds, std::uint64_t seed, double jitter, double scale) {
    if (ds.identities.empty()) throw std::invalid_argument("seed_gaussians: dataset has no identities");
    std::mt19937_64 rng(seed ^ 0x5eed5eedULL);
    const GaussianSet &ref = ds.identities.front().ground_truth;
    GaussianSet gs(ref.size());
    for (std::size_t g = 0; g < ref.size(); ++g) {
        gs.position[g] = {ref.position[g][0] + uniform(rng, -jitter, jitter),
                          ref.position[g][1] + uniform(rng, -jitter, jitter)};
        gs.scale[g] = {scale, scale};
        gs.angle[g] = 0.0;
        gs.color[g] = {0.5, 0.5, 0.5};
        gs.opacity[g] = 0.5;
    }
    return gs;
}

SyntheticDataset take_identities(const SyntheticDataset &ds, std::size_t n, std::vector<IdentityData> *rest) {
    if (n > ds.identities.size()) throw std::invalid_argument("take_identities: not enough identities");
    SyntheticDataset out;
    out.spec = ds.spec;
    out.spec.identities = n;
    out.seed = ds.seed;
    out.scene = ds.scene;
    out.identities.assign(ds.identities.begin(), ds.identities.begin() + static_cast<std::ptrdiff_t>(n));
    if (rest) rest->assign(ds.identities.begin() + static_cast<std::ptrdiff_t>(n), ds.identities.end());
    return out;
}

} // namespace splatcp
