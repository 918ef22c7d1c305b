// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/avatar_store.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <numeric>
#include <stdexcept>
#include <string>

namespace splatcp {

void FactorizedAvatarStore::enable_personalization() {
    if (has_personalization()) return;
    const std::size_t width = layout.residual_block().length;
    personalization.assign(n_identities(), Mat(n_gaussians(), width));
}

void FactorizedAvatarStore::validate() const {
    model.validate();
    layout.validate();
    if (model.n_params() != layout.total) {
        throw std::invalid_argument("FactorizedAvatarStore: params-mode size " +
                                    std::to_string(model.n_params()) + " does not match layout M " +
                                    std::to_string(layout.total));
    }
    if (has_personalization()) {
        if (personalization.size() != n_identities()) {
            throw std::invalid_argument("FactorizedAvatarStore: need one residual per identity");
        }
        for (const Mat &r : personalization) {
            if (r.rows != n_gaussians() || r.cols != layout.residual_block().length) {
                throw std::invalid_argument("FactorizedAvatarStore: residual shape mismatch");
            }
        }
    }
}

Mat raw_slice(const FactorizedAvatarStore &store, std::size_t identity) {
    Mat raw = reconstruct_slice(store.model, identity);
    if (store.has_personalization()) {
        const Mat &res = store.personalization[identity];
        const Block blk = store.layout.residual_block();
        for (std::size_t g = 0; g < raw.rows; ++g)
            for (std::size_t c = 0; c < blk.length; ++c) raw(g, blk.offset + c) += res(g, c);
    }
    return raw;
}

GaussianSet slice_identity(const FactorizedAvatarStore &store, std::size_t identity) {
    return activate(raw_slice(store, identity), store.layout);
}

namespace {

constexpr double kDeadComponentScale = 1e-2;

// Rescales every component so its three factor columns share one norm. The
// reconstruction is unchanged up to rounding.
void balance_columns(CPModel &m) {
    auto col_norm = [](const Mat &f, std::size_t r) {
        double s = 0.0;
        for (std::size_t k = 0; k < f.rows; ++k) s += f(k, r) * f(k, r);
        return std::sqrt(s);
    };
    auto scale_col = [](Mat &f, std::size_t r, double c) {
        for (std::size_t k = 0; k < f.rows; ++k) f(k, r) *= c;
    };
    for (std::size_t r = 0; r < m.rank; ++r) {
        const double np = col_norm(m.u_params, r), ni = col_norm(m.u_identity, r), ng = col_norm(m.u_gaussian, r);
        if (np == 0.0 || ni == 0.0 || ng == 0.0) continue;
        const double target = std::cbrt(np * ni * ng);
        scale_col(m.u_params, r, target / np);
        scale_col(m.u_identity, r, target / ni);
        scale_col(m.u_gaussian, r, target / ng);
    }
}

} // namespace

InitResult init_store(const GaussianSet &seed_set, std::size_t n_identities, std::size_t rank,
                      std::uint64_t seed) {
    if (rank == 0) throw std::invalid_argument("init_store: rank must be >= 1");
    if (n_identities == 0) throw std::invalid_argument("init_store: need at least one identity");
    if (seed_set.size() == 0) throw std::invalid_argument("init_store: empty seed set");

    const ParamLayout layout = layout_2d();
    const Mat raw = inverse_activate(seed_set, layout);
    const Tensor3 slice({1, raw.rows, raw.cols}, raw.data);

    PowerOptions opts;
    opts.seed = seed;
    CPModel single = cp_power(slice, rank, opts);

    InitResult res;

    double max_w = 0.0;
    std::vector<double> weights(rank, 0.0);
    for (std::size_t r = 0; r < rank; ++r) {
        double s = 0.0;
        for (std::size_t g = 0; g < single.n_gaussians(); ++g) s += single.u_gaussian(g, r) * single.u_gaussian(g, r);
        weights[r] = std::sqrt(s);
        max_w = std::max(max_w, weights[r]);
    }
    for (double w : weights)
        if (w <= 1e-9 * std::max(max_w, 1.0)) ++res.report.zero_weight_components;

    double var = 0.0;
    Vec2 mean{0.0, 0.0};
    for (const auto &p : seed_set.position) {
        mean[0] += p[0] / static_cast<double>(seed_set.size());
        mean[1] += p[1] / static_cast<double>(seed_set.size());
    }
    for (const auto &p : seed_set.position) {
        var += (p[0] - mean[0]) * (p[0] - mean[0]) + (p[1] - mean[1]) * (p[1] - mean[1]);
    }
    if (var == 0.0) {
        res.report.low_rank_warning = true;
        res.report.message = "seed positions have zero variance";
    } else if (res.report.zero_weight_components > 0) {
        res.report.low_rank_warning = true;
        res.report.message = std::to_string(res.report.zero_weight_components) +
                             " of " + std::to_string(rank) +
                             " components have zero weight; seed slice rank is below R";
    }

    // Components with no weight would get no gradient on their identity and
    // params columns; give them a small random gaussian column instead.
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t r = 0; r < rank; ++r) {
        if (weights[r] > 1e-9 * std::max(max_w, 1.0)) continue;
        for (std::size_t g = 0; g < single.n_gaussians(); ++g) single.u_gaussian(g, r) = kDeadComponentScale * nd(rng);
    }

    FactorizedAvatarStore &store = res.store;
    store.layout = layout;
    store.model = CPModel(layout.total, n_identities, seed_set.size(), rank);
    store.model.u_params = single.u_params;
    store.model.u_gaussian = single.u_gaussian;
    for (std::size_t i = 0; i < n_identities; ++i)
        for (std::size_t r = 0; r < rank; ++r) store.model.u_identity(i, r) = single.u_identity(0, r);
    balance_columns(store.model);

    res.report.rel_error = rel_error(slice, Tensor3({1, raw.rows, raw.cols}, raw_slice(store, 0).data));
    return res;
}

FactorizedAvatarStore add_identity(const FactorizedAvatarStore &store) {
    FactorizedAvatarStore out = store;
    const std::size_t n = store.n_identities();
    const std::size_t R = store.model.rank;
    Mat ids(n + 1, R);
    std::copy(store.model.u_identity.data.begin(), store.model.u_identity.data.end(), ids.data.begin());
    for (std::size_t r = 0; r < R && n > 0; ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += store.model.u_identity(i, r);
        ids(n, r) = s / static_cast<double>(n);
    }
    out.model.u_identity = std::move(ids);
    if (out.has_personalization()) {
        out.personalization.emplace_back(store.n_gaussians(), store.layout.residual_block().length);
    }
    return out;
}

FactorizedAvatarStore make_dense_store(const std::vector<Mat> &raw_slices, const ParamLayout &layout) {
    if (raw_slices.empty()) throw std::invalid_argument("make_dense_store: no slices");
    const std::size_t n_i = raw_slices.size();
    const std::size_t n_g = raw_slices.front().rows;
    const std::size_t M = layout.total;
    for (const Mat &s : raw_slices) {
        if (s.rows != n_g || s.cols != M) throw std::invalid_argument("make_dense_store: slice shape mismatch");
    }
    FactorizedAvatarStore store;
    store.layout = layout;
    store.model = CPModel(M, n_i, n_g, n_i * M);
    for (std::size_t i = 0; i < n_i; ++i) {
        for (std::size_t m = 0; m < M; ++m) {
            const std::size_t r = i * M + m;
            store.model.u_identity(i, r) = 1.0;
            store.model.u_params(m, r) = 1.0;
            for (std::size_t g = 0; g < n_g; ++g) store.model.u_gaussian(g, r) = raw_slices[i](g, m);
        }
    }
    return store;
}

std::size_t TrainMask::trainable_cp_entries() const {
    auto count = [](const std::vector<std::uint8_t> &v) {
        return static_cast<std::size_t>(std::count(v.begin(), v.end(), std::uint8_t{1}));
    };
    return count(params) + count(identity_rows) + count(gaussian);
}

TrainMask make_mask(const FactorizedAvatarStore &store, MaskMode mode, std::size_t identity) {
    const CPModel &m = store.model;
    const std::size_t R = m.rank;
    if (mode != MaskMode::Full && mode != MaskMode::Custom && identity >= store.n_identities()) {
        throw std::invalid_argument("make_mask: identity " + std::to_string(identity) + " out of range");
    }
    if (mode == MaskMode::Personalization && !store.has_personalization()) {
        throw std::invalid_argument("make_mask: personalization is not enabled on this store");
    }
    TrainMask mask;
    mask.mode = mode;
    mask.identity = identity;
    mask.params.assign(m.u_params.data.size(), 0);
    mask.identity_rows.assign(m.u_identity.data.size(), 0);
    mask.gaussian.assign(m.u_gaussian.data.size(), 0);
    mask.residual.assign(store.personalization.size(), 0);

    auto identity_row = [&](std::size_t i) {
        for (std::size_t r = 0; r < R; ++r) mask.identity_rows[i * R + r] = 1;
    };
    switch (mode) {
    case MaskMode::Full:
        std::fill(mask.params.begin(), mask.params.end(), 1);
        std::fill(mask.identity_rows.begin(), mask.identity_rows.end(), 1);
        std::fill(mask.gaussian.begin(), mask.gaussian.end(), 1);
        break;
    case MaskMode::PerIdentity:
        std::fill(mask.params.begin(), mask.params.end(), 1);
        std::fill(mask.gaussian.begin(), mask.gaussian.end(), 1);
        identity_row(identity);
        break;
    case MaskMode::NovelIdentity:
        identity_row(identity);
        if (store.has_personalization()) mask.residual[identity] = 1;
        break;
    case MaskMode::Personalization:
        mask.residual[identity] = 1;
        break;
    case MaskMode::Custom:
        break;
    }
    return mask;
}

TrainMask dense_baseline_mask(const FactorizedAvatarStore &store) {
    TrainMask mask = make_mask(store, MaskMode::Custom);
    std::fill(mask.gaussian.begin(), mask.gaussian.end(), 1);
    return mask;
}

} // namespace splatcp
