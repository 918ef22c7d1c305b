// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/dataset.hpp>
#include <splatcp/train.hpp>

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

namespace splatcp::io {

class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Everything a CLI run needs. Parsed from UTF-8 `key = value` lines grouped
/// under `[run]`, `[data]`, `[model]`, `[train]` and `[loss]` headers; `#`
/// starts a comment. Unknown sections or keys are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    std::size_t log_every = 1;
    DatasetSpec data;
    std::size_t rank = 16;
    double init_jitter = 0.02;
    double init_scale = 0.06;
    TrainConfig train;
};

RunConfig parse_config(const std::string &text);
RunConfig load_config(const std::filesystem::path &path);

/// Canonical text form listing every key; parse_config(to_text(c)) == c.
std::string to_text(const RunConfig &cfg);

/// "full" or "per_identity:<i>".
std::string mode_to_string(MaskMode mode, std::size_t identity);

} // namespace splatcp::io
