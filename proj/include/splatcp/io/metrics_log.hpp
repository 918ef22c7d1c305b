// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/train.hpp>

#include <string>
#include <vector>

namespace splatcp::io {

/// CSV with header `iter,identity,frame,loss,l1,mask,isopos,isocov,psnr`.
/// Rows are kept when iter % log_every == 0, plus the final iteration; reals
/// are printed with 17 significant digits.
std::string history_csv(const std::vector<HistoryEntry> &history, std::size_t log_every = 1);

} // namespace splatcp::io
