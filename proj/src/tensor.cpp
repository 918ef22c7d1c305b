// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/tensor.hpp>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace splatcp {

namespace {

void check_mode(int mode) {
    if (mode < 1 || mode > 3) {
        throw std::invalid_argument("tensor mode must be 1, 2 or 3, got " + std::to_string(mode));
    }
}

// Maps (mode coordinate, unfolded column) back to the flat tensor index.
std::size_t flat_index(const Dims3 &d, int mode, std::size_t row, std::size_t col) {
    switch (mode) {
    case 1:
        return row * d[1] * d[2] + col;
    case 2: {
        const std::size_t i = col / d[2];
        const std::size_t k = col % d[2];
        return (i * d[1] + row) * d[2] + k;
    }
    default: {
        const std::size_t i = col / d[1];
        const std::size_t j = col % d[1];
        return (i * d[1] + j) * d[2] + row;
    }
    }
}

} // namespace

Tensor3::Tensor3(Dims3 d, std::vector<double> values) : dims(d), data(std::move(values)) {
    if (data.size() != d[0] * d[1] * d[2]) {
        throw std::invalid_argument("Tensor3: data length does not match dims");
    }
}

Mat unfold(const Tensor3 &t, int mode) {
    check_mode(mode);
    const auto &d = t.dims;
    const std::size_t n = d[mode - 1];
    const std::size_t cols = n == 0 ? 0 : t.data.size() / n;
    Mat out(n, cols);
    for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            out(r, c) = t.data[flat_index(d, mode, r, c)];
        }
    }
    return out;
}

Tensor3 fold(const Mat &m, int mode, Dims3 dims) {
    check_mode(mode);
    const std::size_t n = dims[mode - 1];
    const std::size_t total = dims[0] * dims[1] * dims[2];
    if (m.rows != n || m.rows * m.cols != total) {
        throw std::invalid_argument("fold: matrix shape does not match the mode unfolding of dims");
    }
    Tensor3 out(dims);
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            out.data[flat_index(dims, mode, r, c)] = m(r, c);
        }
    }
    return out;
}

Mat khatri_rao(const Mat &a, const Mat &b) {
    if (a.cols != b.cols) {
        throw std::invalid_argument("khatri_rao: column counts differ");
    }
    Mat out(a.rows * b.rows, a.cols);
    for (std::size_t ia = 0; ia < a.rows; ++ia) {
        for (std::size_t ib = 0; ib < b.rows; ++ib) {
            auto dst = out.row(ia * b.rows + ib);
            for (std::size_t r = 0; r < a.cols; ++r) {
                dst[r] = a(ia, r) * b(ib, r);
            }
        }
    }
    return out;
}

Mat mttkrp(const Tensor3 &t, const Mat &f_low, const Mat &f_high, int mode) {
    check_mode(mode);
    const auto &d = t.dims;
    std::size_t n_low = 0, n_high = 0;
    switch (mode) {
    case 1: n_low = d[1]; n_high = d[2]; break;
    case 2: n_low = d[0]; n_high = d[2]; break;
    default: n_low = d[0]; n_high = d[1]; break;
    }
    if (f_low.rows != n_low || f_high.rows != n_high || f_low.cols != f_high.cols) {
        throw std::invalid_argument("mttkrp: factor shapes inconsistent with tensor dims or rank");
    }
    const std::size_t rank = f_low.cols;
    Mat out(d[mode - 1], rank);

    // Loop nest walks the tensor in storage order; accumulation order for each
    // output entry is lexicographic over (low, high).
    for (std::size_t i = 0; i < d[0]; ++i) {
        for (std::size_t j = 0; j < d[1]; ++j) {
            for (std::size_t k = 0; k < d[2]; ++k) {
                const double v = t(i, j, k);
                std::size_t row = 0, lo = 0, hi = 0;
                switch (mode) {
                case 1: row = i; lo = j; hi = k; break;
                case 2: row = j; lo = i; hi = k; break;
                default: row = k; lo = i; hi = j; break;
                }
                auto dst = out.row(row);
                auto a = f_low.row(lo);
                auto b = f_high.row(hi);
                for (std::size_t r = 0; r < rank; ++r) {
                    dst[r] += (v * a[r]) * b[r];
                }
            }
        }
    }
    return out;
}

double frob_norm(const Tensor3 &t) {
    double s = 0.0;
    for (double v : t.data) s += v * v;
    return std::sqrt(s);
}

double rel_error(const Tensor3 &t, const Tensor3 &approx) {
    if (t.dims != approx.dims) {
        throw std::invalid_argument("rel_error: dims differ");
    }
    double num = 0.0, den = 0.0;
    for (std::size_t n = 0; n < t.data.size(); ++n) {
        const double e = t.data[n] - approx.data[n];
        num += e * e;
        den += t.data[n] * t.data[n];
    }
    if (den == 0.0) {
        return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    }
    return std::sqrt(num / den);
}

Mat matmul(const Mat &a, const Mat &b) {
    if (a.cols != b.rows) {
        throw std::invalid_argument("matmul: inner dimensions differ");
    }
    Mat out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i) {
        for (std::size_t p = 0; p < a.cols; ++p) {
            const double v = a(i, p);
            for (std::size_t j = 0; j < b.cols; ++j) {
                out(i, j) += v * b(p, j);
            }
        }
    }
    return out;
}

Mat transpose(const Mat &a) {
    Mat out(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) out(j, i) = a(i, j);
    return out;
}

bool all_finite(std::span<const double> v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace splatcp
