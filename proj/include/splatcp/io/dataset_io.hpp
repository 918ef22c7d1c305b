// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/dataset.hpp>

#include <filesystem>

namespace splatcp::io {

/// Directory layout:
///   manifest.cfg               [run] seed and the [data] section
///   poses/id<i>_<split>.txt    pose file (see read_pose_file)
///   frames/id<i>_<split>_<f>.ppm / .pgm   target image and alpha mask
///   ground_truth.ckpt          dense store holding the raw ground-truth slices
///   ground_truth.tns           the same values as an (N_i, N_g, 9) tensor
/// Pose files hold one pose per line: B whitespace-separated joint angles,
/// optionally followed by the root translation x y. Blank lines and lines
/// starting with '#' are skipped.
std::vector<Pose> read_pose_file(const std::filesystem::path &path, std::size_t bones);
void write_pose_file(const std::vector<Pose> &poses, const std::filesystem::path &path);

void save_dataset(const SyntheticDataset &ds, const std::filesystem::path &dir);

/// Targets come back quantized to 8 bits; the scene is rebuilt from the manifest.
SyntheticDataset load_dataset(const std::filesystem::path &dir);

} // namespace splatcp::io
