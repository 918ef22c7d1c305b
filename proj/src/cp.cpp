// Copyright Contributors to the splatcp Project
// SPDX-License-Identifier: Apache-2.0

#include <splatcp/cp.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace splatcp {

namespace {

constexpr double kAlsRidge = 1e-12;

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const EMat> view(const Mat &m) {
    return {m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}
Eigen::Map<EMat> view(Mat &m) {
    return {m.data.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)};
}

Mat gram(const Mat &a) {
    Mat out(a.cols, a.cols);
    view(out) = view(a).transpose() * view(a);
    return out;
}

// Solves X * v = rhs for X via the pseudo-inverse of v; returns true when the
// ridge had to be applied because v was not numerically positive definite.
bool solve_right(const Mat &rhs, const Mat &v, Mat &x) {
    const EMat vm = view(v);
    x = Mat(rhs.rows, rhs.cols);
    Eigen::LLT<EMat> llt(vm);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-10) {
        // x = rhs * v^-1  <=>  v * x^T = rhs^T (v symmetric)
        const EMat sol = llt.solve(view(rhs).transpose());
        if (sol.allFinite()) {
            view(x) = sol.transpose();
            return false;
        }
    }
    const double scale = std::max(vm.diagonal().maxCoeff(), 1e-300);
    const EMat reg = vm + kAlsRidge * scale * EMat::Identity(vm.rows(), vm.cols());
    Eigen::CompleteOrthogonalDecomposition<EMat> cod(reg);
    view(x) = cod.solve(view(rhs).transpose()).transpose();
    return true;
}

Mat hadamard(const Mat &a, const Mat &b) {
    Mat out(a.rows, a.cols);
    for (std::size_t n = 0; n < a.data.size(); ++n) out.data[n] = a.data[n] * b.data[n];
    return out;
}

Mat random_normal(std::size_t rows, std::size_t cols, std::mt19937_64 &rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Mat out(rows, cols);
    for (double &v : out.data) v = nd(rng);
    return out;
}

// Leading left singular vectors of the mode-n unfolding, padded with random
// columns past the numerical rank of the unfolding.
Mat svd_init(const Tensor3 &t, int mode, std::size_t rank, std::mt19937_64 &rng) {
    const Mat x = unfold(t, mode);
    Mat out = random_normal(x.rows, rank, rng);
    constexpr std::size_t kMaxSvdEntries = 4'000'000;
    if (x.rows * x.cols > kMaxSvdEntries || x.rows == 0 || x.cols == 0) {
        return out;
    }
    Eigen::BDCSVD<EMat> svd(view(x), Eigen::ComputeThinU);
    const auto &u = svd.matrixU();
    const auto &s = svd.singularValues();
    const double s0 = s.size() > 0 ? s(0) : 0.0;
    const std::size_t usable = std::min<std::size_t>(rank, static_cast<std::size_t>(u.cols()));
    for (std::size_t r = 0; r < usable; ++r) {
        if (s0 == 0.0 || s(static_cast<Eigen::Index>(r)) <= 1e-13 * s0) break;
        for (std::size_t i = 0; i < x.rows; ++i) {
            out(i, r) = u(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r));
        }
    }
    return out;
}

// Normalizes each column in place and returns the norms (zero columns left as is).
std::vector<double> normalize_columns(Mat &m) {
    std::vector<double> norms(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t r = 0; r < m.cols; ++r) norms[r] += m(i, r) * m(i, r);
    for (double &n : norms) n = std::sqrt(n);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t r = 0; r < m.cols; ++r)
            if (norms[r] > 0.0) m(i, r) /= norms[r];
    return norms;
}

double normalize(std::vector<double> &v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    s = std::sqrt(s);
    if (s > 0.0)
        for (double &x : v) x /= s;
    return s;
}

// Contract the tensor with vectors on all modes except `free_mode`.
std::vector<double> contract(const Tensor3 &t, const std::vector<double> &a,
                             const std::vector<double> &b, const std::vector<double> &c,
                             int free_mode) {
    const auto &d = t.dims;
    std::vector<double> out(d[free_mode - 1], 0.0);
    for (std::size_t i = 0; i < d[0]; ++i)
        for (std::size_t j = 0; j < d[1]; ++j)
            for (std::size_t k = 0; k < d[2]; ++k) {
                const double v = t(i, j, k);
                switch (free_mode) {
                case 1: out[i] += v * b[j] * c[k]; break;
                case 2: out[j] += v * a[i] * c[k]; break;
                default: out[k] += v * a[i] * b[j]; break;
                }
            }
    return out;
}

double trilinear(const Tensor3 &t, const std::vector<double> &a, const std::vector<double> &b,
                 const std::vector<double> &c) {
    double s = 0.0;
    for (std::size_t i = 0; i < t.dims[0]; ++i)
        for (std::size_t j = 0; j < t.dims[1]; ++j)
            for (std::size_t k = 0; k < t.dims[2]; ++k) s += t(i, j, k) * a[i] * b[j] * c[k];
    return s;
}

std::vector<double> random_unit(std::size_t n, std::mt19937_64 &rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> v(n);
    do {
        for (double &x : v) x = nd(rng);
    } while (normalize(v) == 0.0 && n > 0);
    return v;
}

// Replaces v by the normalized contraction, keeping the previous direction when
// the contraction vanishes.
void power_update(std::vector<double> &v, std::vector<double> next) {
    if (normalize(next) > 0.0) v = std::move(next);
}

} // namespace

void CPModel::validate() const {
    if (rank == 0) throw std::invalid_argument("CPModel: rank must be >= 1");
    if (u_params.cols != rank || u_identity.cols != rank || u_gaussian.cols != rank) {
        throw std::invalid_argument("CPModel: factor column counts must equal the rank");
    }
    if (!all_finite(u_params.data) || !all_finite(u_identity.data) || !all_finite(u_gaussian.data)) {
        throw std::invalid_argument("CPModel: non-finite factor entry");
    }
}

Tensor3 reconstruct_full(const CPModel &m) {
    Tensor3 out(m.dims());
    for (std::size_t i = 0; i < m.n_identities(); ++i) {
        const Mat s = reconstruct_slice(m, i);
        std::copy(s.data.begin(), s.data.end(), out.data.begin() + out.index(i, 0, 0));
    }
    return out;
}

Mat reconstruct_slice(const CPModel &m, std::size_t identity) {
    if (identity >= m.n_identities()) {
        throw std::invalid_argument("reconstruct_slice: identity " + std::to_string(identity) +
                                    " out of range");
    }
    const std::size_t R = m.rank;
    const auto id_row = m.u_identity.row(identity);
    Mat out(m.n_gaussians(), m.n_params());
    std::vector<double> coeff(R);
    for (std::size_t g = 0; g < m.n_gaussians(); ++g) {
        const auto g_row = m.u_gaussian.row(g);
        for (std::size_t r = 0; r < R; ++r) coeff[r] = id_row[r] * g_row[r];
        for (std::size_t p = 0; p < m.n_params(); ++p) {
            const auto p_row = m.u_params.row(p);
            double s = 0.0;
            for (std::size_t r = 0; r < R; ++r) s += coeff[r] * p_row[r];
            out(g, p) = s;
        }
    }
    return out;
}

FactorGrads backward_full(const CPModel &m, const Tensor3 &grad) {
    if (grad.dims != m.dims()) {
        throw std::invalid_argument("backward_full: gradient dims do not match the model");
    }
    FactorGrads out;
    out.g_identity = mttkrp(grad, m.u_gaussian, m.u_params, 1);
    out.g_gaussian = mttkrp(grad, m.u_identity, m.u_params, 2);
    out.g_params = mttkrp(grad, m.u_identity, m.u_gaussian, 3);
    return out;
}

FactorGrads backward_slice(const CPModel &m, std::size_t identity, const Mat &grad_slice) {
    if (identity >= m.n_identities()) {
        throw std::invalid_argument("backward_slice: identity out of range");
    }
    if (grad_slice.rows != m.n_gaussians() || grad_slice.cols != m.n_params()) {
        throw std::invalid_argument("backward_slice: gradient must be N_g x M");
    }
    const std::size_t R = m.rank;
    FactorGrads out{Mat(m.n_params(), R), Mat(m.n_identities(), R), Mat(m.n_gaussians(), R)};
    const auto a = m.u_identity.row(identity);
    auto gi = out.g_identity.row(identity);
    // Same association and accumulation order as mttkrp so that this matches
    // backward_full on a tensor that is zero outside the slice.
    for (std::size_t g = 0; g < m.n_gaussians(); ++g) {
        const auto b = m.u_gaussian.row(g);
        auto gg = out.g_gaussian.row(g);
        for (std::size_t p = 0; p < m.n_params(); ++p) {
            const double v = grad_slice(g, p);
            const auto c = m.u_params.row(p);
            auto gp = out.g_params.row(p);
            for (std::size_t r = 0; r < R; ++r) {
                gi[r] += (v * b[r]) * c[r];
                gg[r] += (v * a[r]) * c[r];
                gp[r] += (v * a[r]) * b[r];
            }
        }
    }
    return out;
}

AlsResult cp_als(const Tensor3 &t, std::size_t rank, const AlsOptions &opts) {
    if (rank == 0) throw std::invalid_argument("cp_als: rank must be >= 1");
    if (opts.max_sweeps == 0) throw std::invalid_argument("cp_als: max_sweeps must be >= 1");
    if (!all_finite(t.data)) throw std::invalid_argument("cp_als: tensor has non-finite entries");

    std::mt19937_64 rng(opts.seed);
    AlsResult res;
    CPModel &m = res.model;
    m.rank = rank;
    m.u_identity = svd_init(t, 1, rank, rng);
    m.u_gaussian = svd_init(t, 2, rank, rng);
    m.u_params = svd_init(t, 3, rank, rng);

    double prev = std::numeric_limits<double>::infinity();
    for (std::size_t sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        const CPModel last = m;
        Mat x;
        std::size_t ridged = 0;
        ridged += solve_right(mttkrp(t, m.u_gaussian, m.u_params, 1), hadamard(gram(m.u_gaussian), gram(m.u_params)), x);
        m.u_identity = std::move(x);
        normalize_columns(m.u_identity);

        ridged += solve_right(mttkrp(t, m.u_identity, m.u_params, 2), hadamard(gram(m.u_identity), gram(m.u_params)), x);
        m.u_gaussian = std::move(x);
        normalize_columns(m.u_gaussian);

        ridged += solve_right(mttkrp(t, m.u_identity, m.u_gaussian, 3),
                              hadamard(gram(m.u_identity), gram(m.u_gaussian)), x);
        m.u_params = std::move(x);

        const double err = rel_error(t, reconstruct_full(m));
        // A sweep that got worse means the regularized solves have stalled in
        // a degenerate configuration; keep the previous factors and stop.
        if (!(err <= prev)) {
            m = last;
            break;
        }
        res.error_history.push_back(err);
        res.ridge_events += ridged > 0;
        res.sweeps = sweep + 1;
        if (prev - err < opts.tol || err < opts.tol) break;
        prev = err;
    }

    // Component weights live in the gaussian-mode factor.
    const auto w = normalize_columns(m.u_params);
    for (std::size_t g = 0; g < m.n_gaussians(); ++g)
        for (std::size_t r = 0; r < rank; ++r) m.u_gaussian(g, r) *= w[r];
    return res;
}

CPModel cp_power(const Tensor3 &t, std::size_t rank, const PowerOptions &opts) {
    if (rank == 0) throw std::invalid_argument("cp_power: rank must be >= 1");
    if (!all_finite(t.data)) throw std::invalid_argument("cp_power: tensor has non-finite entries");
    const std::size_t restarts = std::max<std::size_t>(opts.restarts, 1);

    std::mt19937_64 rng(opts.seed);
    const auto &d = t.dims;
    CPModel m(d[2], d[0], d[1], rank);
    Tensor3 residual = t;

    for (std::size_t r = 0; r < rank; ++r) {
        double best_lambda = 0.0;
        std::vector<double> best_a, best_b, best_c;
        for (std::size_t s = 0; s < restarts; ++s) {
            auto a = random_unit(d[0], rng);
            auto b = random_unit(d[1], rng);
            auto c = random_unit(d[2], rng);
            for (std::size_t it = 0; it < opts.iters_per_component; ++it) {
                power_update(a, contract(residual, a, b, c, 1));
                power_update(b, contract(residual, a, b, c, 2));
                power_update(c, contract(residual, a, b, c, 3));
            }
            const double lambda = trilinear(residual, a, b, c);
            if (best_a.empty() || std::abs(lambda) > std::abs(best_lambda)) {
                best_lambda = lambda;
                best_a = std::move(a);
                best_b = std::move(b);
                best_c = std::move(c);
            }
        }
        for (std::size_t i = 0; i < d[0]; ++i)
            for (std::size_t j = 0; j < d[1]; ++j)
                for (std::size_t k = 0; k < d[2]; ++k)
                    residual(i, j, k) -= best_lambda * best_a[i] * best_b[j] * best_c[k];
        for (std::size_t i = 0; i < d[0]; ++i) m.u_identity(i, r) = best_a[i];
        for (std::size_t j = 0; j < d[1]; ++j) m.u_gaussian(j, r) = best_lambda * best_b[j];
        for (std::size_t k = 0; k < d[2]; ++k) m.u_params(k, r) = best_c[k];
    }
    return m;
}

ParamCount param_count(std::uint64_t m, std::uint64_t n_identities, std::uint64_t n_gaussians,
                       std::uint64_t rank) {
    ParamCount pc;
    pc.factorized = (m + n_identities + n_gaussians) * rank;
    pc.dense = m * n_identities * n_gaussians;
    pc.ratio = pc.factorized == 0 ? 0.0
                                  : static_cast<double>(pc.dense) / static_cast<double>(pc.factorized);
    return pc;
}

} // namespace splatcp
