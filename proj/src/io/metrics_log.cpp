// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/io/metrics_log.hpp>

#include <cstdio>
#include <stdexcept>

namespace splatcp::io {

std::string history_csv(const std::vector<HistoryEntry> &history, std::size_t log_every) {
    if (log_every == 0) throw std::invalid_argument("history_csv: log_every must be >= 1");
    std::string out = "iter,identity,frame,loss,l1,mask,isopos,isocov,psnr\n";
    char buf[512];
    for (std::size_t k = 0; k < history.size(); ++k) {
        const HistoryEntry &h = history[k];
        if (h.iteration % log_every != 0 && k + 1 != history.size()) continue;
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", h.iteration, h.identity,
                      h.frame, h.loss, h.l1, h.mask, h.isopos, h.isocov, h.psnr);
        out += buf;
    }
    return out;
}

} // namespace splatcp::io
