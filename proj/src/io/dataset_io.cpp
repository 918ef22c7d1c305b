// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/io/dataset_io.hpp>

#include <splatcp/avatar_store.hpp>
#include <splatcp/io/checkpoint.hpp>
#include <splatcp/io/config.hpp>
#include <splatcp/io/netpbm.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace splatcp::io {

namespace fs = std::filesystem;

namespace {

const char *split_name(Split s) { return s == Split::Train ? "train" : "heldout"; }

fs::path pose_path(const fs::path &dir, std::size_t i, Split s) {
    return dir / "poses" / ("id" + std::to_string(i) + "_" + split_name(s) + ".txt");
}

fs::path frame_stem(const fs::path &dir, std::size_t i, Split s, std::size_t f) {
    return dir / "frames" / ("id" + std::to_string(i) + "_" + split_name(s) + "_" + std::to_string(f));
}

std::vector<Frame> read_frames(const fs::path &dir, std::size_t i, Split s, const DatasetSpec &spec) {
    const std::size_t n = s == Split::Train ? spec.train_poses : spec.heldout_poses;
    const std::vector<Pose> poses = read_pose_file(pose_path(dir, i, s), spec.bones);
    if (poses.size() != n) throw FormatError("pose count mismatch in " + pose_path(dir, i, s).string());
    std::vector<Frame> frames;
    for (std::size_t f = 0; f < n; ++f) {
        const fs::path stem = frame_stem(dir, i, s, f);
        Frame fr;
        fr.pose = poses[f];
        fr.target = read_ppm(fs::path(stem.string() + ".ppm"));
        fr.target_mask = read_pgm(fs::path(stem.string() + ".pgm"));
        if (fr.target.width != spec.image_size || fr.target.height != spec.image_size ||
            fr.target_mask.width != spec.image_size || fr.target_mask.height != spec.image_size) {
            throw FormatError("frame size mismatch at " + stem.string());
        }
        frames.push_back(std::move(fr));
    }
    return frames;
}

} // namespace

void write_pose_file(const std::vector<Pose> &poses, const fs::path &path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    char buf[64];
    for (const Pose &p : poses) {
        for (std::size_t b = 0; b < p.angles.size(); ++b) {
            std::snprintf(buf, sizeof buf, b == 0 ? "%.17g" : " %.17g", p.angles[b]);
            out << buf;
        }
        if (p.root_translation[0] != 0.0 || p.root_translation[1] != 0.0) {
            std::snprintf(buf, sizeof buf, " %.17g %.17g", p.root_translation[0], p.root_translation[1]);
            out << buf;
        }
        out << "\n";
    }
    if (!out) throw FormatError("write failed for " + path.string());
}

std::vector<Pose> read_pose_file(const fs::path &path, std::size_t bones) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open pose file " + path.string());
    std::vector<Pose> poses;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        std::istringstream ls(line);
        std::vector<double> v;
        std::string tok;
        while (ls >> tok) {
            std::size_t used = 0;
            double x = 0.0;
            try {
                x = std::stod(tok, &used);
            } catch (const std::exception &) {
                used = 0;
            }
            if (used != tok.size() || !std::isfinite(x)) {
                throw FormatError(path.string() + ":" + std::to_string(lineno) + ": bad number '" + tok + "'");
            }
            v.push_back(x);
        }
        if (v.size() != bones && v.size() != bones + 2) {
            throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(bones) +
                              " angles, got " + std::to_string(v.size()) + " values");
        }
        Pose p;
        p.angles.assign(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(bones));
        if (v.size() == bones + 2) p.root_translation = {v[bones], v[bones + 1]};
        poses.push_back(std::move(p));
    }
    return poses;
}

void save_dataset(const SyntheticDataset &ds, const fs::path &dir) {
    fs::create_directories(dir / "poses");
    fs::create_directories(dir / "frames");

    RunConfig manifest;
    manifest.seed = ds.seed;
    manifest.data = ds.spec;
    const std::string text = to_text(manifest);
    write_file(dir / "manifest.cfg", std::vector<std::uint8_t>(text.begin(), text.end()));

    const ParamLayout layout = layout_2d();
    std::vector<Mat> raw;
    for (std::size_t i = 0; i < ds.identities.size(); ++i) {
        const IdentityData &id = ds.identities[i];
        raw.push_back(inverse_activate(id.ground_truth, layout));
        for (Split s : {Split::Train, Split::HeldOut}) {
            const auto &frames = s == Split::Train ? id.train : id.held_out;
            std::vector<Pose> poses;
            for (const Frame &fr : frames) poses.push_back(fr.pose);
            write_pose_file(poses, pose_path(dir, i, s));
            for (std::size_t f = 0; f < frames.size(); ++f) {
                const fs::path stem = frame_stem(dir, i, s, f);
                write_ppm(frames[f].target, fs::path(stem.string() + ".ppm"));
                write_pgm(frames[f].target_mask, fs::path(stem.string() + ".pgm"));
            }
        }
    }
    save_checkpoint(make_dense_store(raw, layout), dir / "ground_truth.ckpt");

    const std::size_t ng = ds.spec.gaussians, m = layout.total;
    Tensor3 gt({ds.identities.size(), ng, m});
    for (std::size_t i = 0; i < raw.size(); ++i)
        for (std::size_t g = 0; g < ng; ++g)
            for (std::size_t p = 0; p < m; ++p) gt.data[gt.index(i, g, p)] = raw[i](g, p);
    save_tensor(gt, dir / "ground_truth.tns");
}

SyntheticDataset load_dataset(const fs::path &dir) {
    const RunConfig manifest = load_config(dir / "manifest.cfg");
    SyntheticDataset ds;
    ds.spec = manifest.data;
    ds.seed = manifest.seed;
    ds.scene = Scene{make_stick_figure(ds.spec.bones), default_viewport(ds.spec.image_size)};

    const FactorizedAvatarStore gt = load_checkpoint(dir / "ground_truth.ckpt");
    if (gt.model.u_identity.rows != ds.spec.identities || gt.model.u_gaussian.rows != ds.spec.gaussians ||
        gt.layout.id != LayoutId::Planar2D) {
        throw FormatError("ground_truth.ckpt does not match the manifest");
    }
    for (std::size_t i = 0; i < ds.spec.identities; ++i) {
        IdentityData id;
        id.ground_truth = slice_identity(gt, i);
        id.train = read_frames(dir, i, Split::Train, ds.spec);
        id.held_out = read_frames(dir, i, Split::HeldOut, ds.spec);
        ds.identities.push_back(std::move(id));
    }
    return ds;
}

} // namespace splatcp::io
