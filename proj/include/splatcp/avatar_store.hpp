// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/cp.hpp>
#include <splatcp/layout.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace splatcp {

/// All identities' Gaussians as one CP model over raw (pre-activation) values,
/// plus optional per-identity appearance/opacity residuals.
struct FactorizedAvatarStore {
    CPModel model;
    ParamLayout layout;
    // Empty when personalization is disabled; otherwise one N_g x W matrix per
    // identity, W = layout.residual_block().length.
    std::vector<Mat> personalization;

    std::size_t n_identities() const { return model.n_identities(); }
    std::size_t n_gaussians() const { return model.n_gaussians(); }
    bool has_personalization() const { return !personalization.empty(); }

    /// Adds zero residuals for every identity (no-op when already enabled).
    void enable_personalization();
    void validate() const;

    bool operator==(const FactorizedAvatarStore &o) const {
        return model == o.model && layout.id == o.layout.id && personalization == o.personalization;
    }
};

/// Raw N_g x M slice of identity i, residual included.
Mat raw_slice(const FactorizedAvatarStore &store, std::size_t identity);
GaussianSet slice_identity(const FactorizedAvatarStore &store, std::size_t identity);

struct InitReport {
    double rel_error = 0.0;            // seed slice vs its rank-R reconstruction
    std::size_t zero_weight_components = 0;
    bool low_rank_warning = false;
    std::string message;
};

struct InitResult {
    FactorizedAvatarStore store;
    InitReport report;
};

/// Decomposes the seed identity's raw slice with cp_power and copies its
/// identity row to all n_identities rows. Zero-weight components get a small
/// random gaussian column, and each component's three columns are rescaled to
/// a common norm.
InitResult init_store(const GaussianSet &seed_set, std::size_t n_identities, std::size_t rank,
                      std::uint64_t seed);

/// Appends an identity row equal to the column-wise mean of the existing rows.
FactorizedAvatarStore add_identity(const FactorizedAvatarStore &store);

/// Exact full-rank store with no sharing: R = N_i*M, one-hot identity and
/// params factors, raw values held in the gaussian factor.
FactorizedAvatarStore make_dense_store(const std::vector<Mat> &raw_slices, const ParamLayout &layout);

enum class MaskMode { Full, PerIdentity, NovelIdentity, Personalization, Custom };

struct TrainMask {
    MaskMode mode = MaskMode::Full;
    std::size_t identity = 0;
    std::vector<std::uint8_t> params;   // shaped like u_params
    std::vector<std::uint8_t> identity_rows; // shaped like u_identity
    std::vector<std::uint8_t> gaussian; // shaped like u_gaussian
    std::vector<std::uint8_t> residual; // one flag per identity residual

    std::size_t trainable_cp_entries() const;
};

TrainMask make_mask(const FactorizedAvatarStore &store, MaskMode mode, std::size_t identity = 0);

/// Only the gaussian factor is trainable; with make_dense_store this trains
/// every identity's raw parameters independently.
TrainMask dense_baseline_mask(const FactorizedAvatarStore &store);

} // namespace splatcp
