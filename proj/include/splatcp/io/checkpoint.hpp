// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/avatar_store.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <vector>

namespace splatcp::io {

/// Malformed or corrupted file. Messages are single-line.
class FormatError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kTensorVersion = 1;

// Checkpoint layout, all integers and reals little-endian:
//   char[4]  "MIGS"
//   u32      version (1)
//   u32      M, N_i, N_g, R
//   u32      layout id (0 = 2D, 1 = 3D, 2 = generic)
//   u32      flags (bit 0: personalization residuals present)
//   f64      u_params   [M   x R] row-major
//   f64      u_identity [N_i x R] row-major
//   f64      u_gaussian [N_g x R] row-major
//   f64      residuals  [N_i x N_g x W] if flag bit 0, W = appearance + opacity dims
//   u32      CRC-32 (zlib polynomial) of every preceding byte
std::vector<std::uint8_t> encode_checkpoint(const FactorizedAvatarStore &store);
FactorizedAvatarStore decode_checkpoint(const std::vector<std::uint8_t> &bytes);

void save_checkpoint(const FactorizedAvatarStore &store, const std::filesystem::path &path);
FactorizedAvatarStore load_checkpoint(const std::filesystem::path &path);

// Tensor layout: char[4] "TNS3", u32 version, u64 n1, n2, n3, f64 data
// (row-major), u32 CRC-32.
std::vector<std::uint8_t> encode_tensor(const Tensor3 &t);
Tensor3 decode_tensor(const std::vector<std::uint8_t> &bytes);
void save_tensor(const Tensor3 &t, const std::filesystem::path &path);
Tensor3 load_tensor(const std::filesystem::path &path);

std::uint32_t crc32(const std::uint8_t *data, std::size_t n);

std::vector<std::uint8_t> read_file(const std::filesystem::path &path);
void write_file(const std::filesystem::path &path, const std::vector<std::uint8_t> &bytes);

} // namespace splatcp::io
