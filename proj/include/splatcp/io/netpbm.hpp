// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/render.hpp>

#include <cstdint>
#include <filesystem>
#include <vector>

namespace splatcp::io {

/// Binary P6, maxval 255, channel byte = round(clamp(v, 0, 1) * 255).
std::vector<std::uint8_t> encode_ppm(const Image &img);
Image decode_ppm(const std::vector<std::uint8_t> &bytes);

/// Binary P5 grayscale with the same quantization, used for alpha masks.
std::vector<std::uint8_t> encode_pgm(const AlphaMask &mask);
AlphaMask decode_pgm(const std::vector<std::uint8_t> &bytes);

void write_ppm(const Image &img, const std::filesystem::path &path);
Image read_ppm(const std::filesystem::path &path);
void write_pgm(const AlphaMask &mask, const std::filesystem::path &path);
AlphaMask read_pgm(const std::filesystem::path &path);

} // namespace splatcp::io
