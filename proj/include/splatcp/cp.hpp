// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <splatcp/tensor.hpp>

#include <cstdint>
#include <vector>

namespace splatcp {

/// Rank-R CP model of an (identities x gaussians x params) tensor:
///   w[i,g,p] = sum_r u_identity(i,r) * u_gaussian(g,r) * u_params(p,r)
/// Mode 1 is the identity mode, mode 2 the gaussian mode, mode 3 the params
/// mode, so unfold(w, 2) = u_gaussian * khatri_rao(u_identity, u_params)^T.
struct CPModel {
    std::size_t rank = 0;
    Mat u_params;   // M x R
    Mat u_identity; // N_i x R
    Mat u_gaussian; // N_g x R

    CPModel() = default;
    CPModel(std::size_t m, std::size_t n_identities, std::size_t n_gaussians, std::size_t r)
        : rank(r), u_params(m, r), u_identity(n_identities, r), u_gaussian(n_gaussians, r) {}

    std::size_t n_params() const { return u_params.rows; }
    std::size_t n_identities() const { return u_identity.rows; }
    std::size_t n_gaussians() const { return u_gaussian.rows; }
    Dims3 dims() const { return {n_identities(), n_gaussians(), n_params()}; }

    /// Throws std::invalid_argument when factor shapes disagree or entries are non-finite.
    void validate() const;

    bool operator==(const CPModel &) const = default;
};

struct FactorGrads {
    Mat g_params;
    Mat g_identity;
    Mat g_gaussian;
};

Tensor3 reconstruct_full(const CPModel &m);

/// N_g x M slice for identity i. Reads only row i of u_identity and produces
/// values bit-identical to the corresponding slice of reconstruct_full.
Mat reconstruct_slice(const CPModel &m, std::size_t identity);

FactorGrads backward_full(const CPModel &m, const Tensor3 &grad);

/// Gradient of a loss that depends only on identity i's slice. Rows j != i of
/// g_identity are exactly zero.
FactorGrads backward_slice(const CPModel &m, std::size_t identity, const Mat &grad_slice);

struct AlsResult {
    CPModel model;
    std::vector<double> error_history; // relative error after each sweep
    std::size_t sweeps = 0;
    std::size_t ridge_events = 0; // sweeps where the Gram product needed the ridge
};

struct AlsOptions {
    std::size_t max_sweeps = 200;
    double tol = 1e-14;
    std::uint64_t seed = 0;
};

/// Alternating least squares. Factors start from the leading left singular
/// vectors of each unfolding (random columns past the mode dimension).
AlsResult cp_als(const Tensor3 &t, std::size_t rank, const AlsOptions &opts = {});

struct PowerOptions {
    std::size_t iters_per_component = 100;
    std::size_t restarts = 5;
    std::uint64_t seed = 0;
};

/// Greedy rank-1 tensor power iteration with deflation. Factors come back unit
/// norm except u_gaussian, whose column r carries the component weight.
CPModel cp_power(const Tensor3 &t, std::size_t rank, const PowerOptions &opts = {});

struct ParamCount {
    std::uint64_t factorized = 0;
    std::uint64_t dense = 0;
    double ratio = 0.0;
};

ParamCount param_count(std::uint64_t m, std::uint64_t n_identities, std::uint64_t n_gaussians,
                       std::uint64_t rank);

} // namespace splatcp
