// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace splatcp {

/// Dense row-major matrix of doubles.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Mat() = default;
    Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

    double &operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
    std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

    bool operator==(const Mat &) const = default;
};

using Dims3 = std::array<std::size_t, 3>;

/// Dense third-order tensor, row-major: idx(i,j,k) = (i*n2 + j)*n3 + k.
struct Tensor3 {
    Dims3 dims{0, 0, 0};
    std::vector<double> data;

    Tensor3() = default;
    Tensor3(Dims3 d, double fill = 0.0) : dims(d), data(d[0] * d[1] * d[2], fill) {}
    Tensor3(Dims3 d, std::vector<double> values);

    std::size_t index(std::size_t i, std::size_t j, std::size_t k) const {
        return (i * dims[1] + j) * dims[2] + k;
    }
    double &operator()(std::size_t i, std::size_t j, std::size_t k) { return data[index(i, j, k)]; }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const {
        return data[index(i, j, k)];
    }

    bool operator==(const Tensor3 &) const = default;
};

// Unfolding convention. The row index is the coordinate of `mode`; the column
// index linearizes the two remaining modes with the lower-numbered one varying
// slowest:
//   mode 1: column = j*n3 + k
//   mode 2: column = i*n3 + k
//   mode 3: column = i*n2 + j
// Khatri-Rao rows are a-major (row = ia*J + ib), so for mode n the matching
// product is khatri_rao(F_low, F_high) over the two remaining modes and
// unfold(t, n) ~= F_n * khatri_rao(F_low, F_high)^T.

Mat unfold(const Tensor3 &t, int mode);
Tensor3 fold(const Mat &m, int mode, Dims3 dims);

Mat khatri_rao(const Mat &a, const Mat &b);

/// unfold(t, mode) * khatri_rao(f_low, f_high), computed without forming the
/// Khatri-Rao product. `f_low`/`f_high` are the factors of the lower/higher
/// numbered remaining modes. Each term is accumulated as (t * f_low) * f_high in
/// lexicographic order of the remaining indices.
Mat mttkrp(const Tensor3 &t, const Mat &f_low, const Mat &f_high, int mode);

double frob_norm(const Tensor3 &t);
double rel_error(const Tensor3 &t, const Tensor3 &approx);

// Small dense helpers.
Mat matmul(const Mat &a, const Mat &b);
Mat transpose(const Mat &a);
bool all_finite(std::span<const double> v);

} // namespace splatcp
