#pragma once

// Nearest-Kronecker-product machinery: one-sided Jacobi SVD, rank-Q
// synthesis, optimal decomposition and the structured input products
// used by the factored updates.
//
// Vectorization is column-major throughout: a length-D response m is viewed
// as a D1 x D2 matrix whose column c holds m[c*D1 .. c*D1 + D1 - 1], and
// m2 (x) m1 == vec(m1 m2^T).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "signal.hpp"

namespace nkpsaf {

struct SvdResult {
    std::size_t rows = 0, cols = 0;
    std::vector<double> singular_values;  // descending, length min(rows, cols)
    std::vector<double> left;              // rows x k, column-major
    std::vector<double> right;             // cols x k, column-major

    std::span<const double> left_vector(std::size_t i) const { return {left.data() + i * rows, rows}; }
    std::span<const double> right_vector(std::size_t i) const { return {right.data() + i * cols, cols}; }
};

namespace detail {

// One-sided Jacobi on a tall matrix (rows >= cols), column-major.
inline SvdResult jacobi_tall(std::vector<double> a, std::size_t m, std::size_t n, double tol) {
    std::vector<double> v(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        v[i * n + i] = 1.0;

    for (int sweep = 0; sweep < 80; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                double* ap = a.data() + p * m;
                double* aq = a.data() + q * m;
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += ap[i] * ap[i];
                    beta += aq[i] * aq[i];
                    gamma += ap[i] * aq[i];
                }
                if (gamma == 0.0)
                    continue;
                const double scale = std::sqrt(alpha * beta);
                const double rel = std::abs(gamma) / scale;
                off = std::max(off, rel);
                if (rel <= tol)
                    continue;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = ap[i], y = aq[i];
                    ap[i] = c * x - s * y;
                    aq[i] = s * x + c * y;
                }
                double* vp = v.data() + p * n;
                double* vq = v.data() + q * n;
                for (std::size_t i = 0; i < n; ++i) {
                    const double x = vp[i], y = vq[i];
                    vp[i] = c * x - s * y;
                    vq[i] = s * x + c * y;
                }
            }
        }
        if (off <= tol)
            break;
    }

    std::vector<double> sv(n);
    for (std::size_t j = 0; j < n; ++j)
        sv[j] = norm2({a.data() + j * m, m});
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });

    SvdResult r;
    r.rows = m;
    r.cols = n;
    r.singular_values.resize(n);
    r.left.assign(m * n, 0.0);
    r.right.assign(n * n, 0.0);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t j = order[k];
        r.singular_values[k] = sv[j];
        if (sv[j] > 0.0)
            for (std::size_t i = 0; i < m; ++i)
                r.left[k * m + i] = a[j * m + i] / sv[j];
        std::copy_n(v.data() + j * n, n, r.right.data() + k * n);
    }
    return r;
}

} // namespace detail

// Thin SVD of a rows x cols column-major matrix.
inline SvdResult jacobi_svd(std::span<const double> a, std::size_t rows, std::size_t cols, double tol = 1e-12) {
    if (rows == 0 || cols == 0 || a.size() != rows * cols)
        throw DimensionError("jacobi_svd: matrix size does not match rows * cols");
    if (rows >= cols)
        return detail::jacobi_tall(std::vector<double>(a.begin(), a.end()), rows, cols, tol);

    std::vector<double> at(rows * cols);
    for (std::size_t j = 0; j < cols; ++j)
        for (std::size_t i = 0; i < rows; ++i)
            at[i * cols + j] = a[j * rows + i];
    auto t = detail::jacobi_tall(std::move(at), cols, rows, tol);
    SvdResult r;
    r.rows = rows;
    r.cols = cols;
    r.singular_values = std::move(t.singular_values);
    r.left = std::move(t.right);
    r.right = std::move(t.left);
    return r;
}

// Rank-Q sub-filter stacks. m1 holds Q blocks of length d1, m2 Q blocks of d2.
struct KronFactors {
    std::size_t d1 = 0, d2 = 0, rank = 0;
    std::vector<double> m1, m2;

    KronFactors() = default;
    KronFactors(std::size_t d1_, std::size_t d2_, std::size_t rank_)
        : d1(d1_), d2(d2_), rank(rank_), m1(d1_ * rank_, 0.0), m2(d2_ * rank_, 0.0) {
        if (d1 == 0 || d2 == 0 || rank == 0)
            throw DimensionError("KronFactors: D1, D2 and Q must be positive");
    }

    std::size_t length() const noexcept { return d1 * d2; }
    std::span<double> left(std::size_t q) { return {m1.data() + q * d1, d1}; }
    std::span<double> right(std::size_t q) { return {m2.data() + q * d2, d2}; }
    std::span<const double> left(std::size_t q) const { return {m1.data() + q * d1, d1}; }
    std::span<const double> right(std::size_t q) const { return {m2.data() + q * d2, d2}; }

    bool finite() const { return all_finite(m1) && all_finite(m2); }

    // [iota, 0, ..., 0] for every block.
    static KronFactors method_one(std::size_t d1, std::size_t d2, std::size_t rank, double iota) {
        KronFactors f(d1, d2, rank);
        for (std::size_t q = 0; q < rank; ++q) {
            f.m1[q * d1] = iota;
            f.m2[q * d2] = iota;
        }
        return f;
    }

    // [iota, ..., iota] for every block.
    static KronFactors method_two(std::size_t d1, std::size_t d2, std::size_t rank, double iota) {
        KronFactors f(d1, d2, rank);
        std::fill(f.m1.begin(), f.m1.end(), iota);
        std::fill(f.m2.begin(), f.m2.end(), iota);
        return f;
    }
};

// sum_q vec(m1_q m2_q^T), written into `out` (length D1*D2).
inline void kron_synthesize(const KronFactors& f, std::span<double> out) {
    if (out.size() != f.length() || f.m1.size() != f.d1 * f.rank || f.m2.size() != f.d2 * f.rank)
        throw DimensionError("kron_synthesize: factor dimensions inconsistent");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t q = 0; q < f.rank; ++q) {
        const auto a = f.left(q);
        const auto b = f.right(q);
        for (std::size_t c = 0; c < f.d2; ++c) {
            double* col = out.data() + c * f.d1;
            for (std::size_t i = 0; i < f.d1; ++i)
                col[i] += a[i] * b[c];
        }
    }
}

inline std::vector<double> kron_synthesize(const KronFactors& f) {
    std::vector<double> out(f.length());
    kron_synthesize(f, out);
    return out;
}

struct NkpDecomposition {
    KronFactors factors;
    double omega = 0.0;
    SvdResult svd;
};

// ||M0 - M1 M2^T||_F / ||M0||_F for the best rank-Q factors, from the
// singular spectrum.
inline double tail_ratio(const SvdResult& s, std::size_t rank) {
    double total = 0.0, tail = 0.0;
    for (std::size_t i = 0; i < s.singular_values.size(); ++i) {
        const double e = s.singular_values[i] * s.singular_values[i];
        total += e;
        if (i >= rank)
            tail += e;
    }
    if (total == 0.0)
        throw ParameterError("nkp_decompose: zero impulse response");
    return std::sqrt(tail / total);
}

inline NkpDecomposition nkp_decompose(std::span<const double> m0, std::size_t d1, std::size_t d2, std::size_t rank) {
    if (d1 == 0 || d2 == 0 || d1 * d2 != m0.size())
        throw DimensionError("nkp_decompose: length " + std::to_string(m0.size()) + " is not D1*D2 = "
                             + std::to_string(d1) + "*" + std::to_string(d2));
    if (rank == 0 || rank > std::min(d1, d2))
        throw DimensionError("nkp_decompose: Q must satisfy 1 <= Q <= min(D1, D2)");
    NkpDecomposition out;
    out.svd = jacobi_svd(m0, d1, d2);
    out.omega = tail_ratio(out.svd, rank);
    out.factors = KronFactors(d1, d2, rank);
    for (std::size_t q = 0; q < rank; ++q) {
        const double s = std::sqrt(out.svd.singular_values[q]);
        const auto h1 = out.svd.left_vector(q);
        const auto h2 = out.svd.right_vector(q);
        auto a = out.factors.left(q);
        auto b = out.factors.right(q);
        for (std::size_t i = 0; i < d1; ++i)
            a[i] = s * h1[i];
        for (std::size_t i = 0; i < d2; ++i)
            b[i] = s * h2[i];
    }
    return out;
}

inline NkpDecomposition nkp_decompose(const ImpulseResponse& m0, std::size_t d1, std::size_t d2, std::size_t rank) {
    return nkp_decompose(m0.taps(), d1, d2, rank);
}

// Stacks X m2_q over q, X = x reshaped D1 x D2. Output length Q*D1.
inline void filtered_input_left(std::span<const double> x, const KronFactors& f, std::span<double> out) {
    if (x.size() != f.length() || out.size() != f.rank * f.d1)
        throw DimensionError("filtered_input_left: dimension mismatch");
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t q = 0; q < f.rank; ++q) {
        const auto b = f.right(q);
        double* o = out.data() + q * f.d1;
        for (std::size_t c = 0; c < f.d2; ++c) {
            const double* col = x.data() + c * f.d1;
            const double w = b[c];
            for (std::size_t i = 0; i < f.d1; ++i)
                o[i] += col[i] * w;
        }
    }
}

inline std::vector<double> filtered_input_left(std::span<const double> x, const KronFactors& f) {
    std::vector<double> out(f.rank * f.d1);
    filtered_input_left(x, f, out);
    return out;
}

// Stacks X^T m1_q over q. Output length Q*D2.
inline void filtered_input_right(std::span<const double> x, const KronFactors& f, std::span<double> out) {
    if (x.size() != f.length() || out.size() != f.rank * f.d2)
        throw DimensionError("filtered_input_right: dimension mismatch");
    for (std::size_t q = 0; q < f.rank; ++q) {
        const auto a = f.left(q);
        double* o = out.data() + q * f.d2;
        for (std::size_t c = 0; c < f.d2; ++c) {
            const double* col = x.data() + c * f.d1;
            double acc = 0.0;
            for (std::size_t i = 0; i < f.d1; ++i)
                acc += col[i] * a[i];
            o[c] = acc;
        }
    }
}

inline std::vector<double> filtered_input_right(std::span<const double> x, const KronFactors& f) {
    std::vector<double> out(f.rank * f.d2);
    filtered_input_right(x, f, out);
    return out;
}

// ||m0 - approx|| / ||m0||.
inline double misalignment(std::span<const double> m0, std::span<const double> approx) {
    if (m0.size() != approx.size())
        throw DimensionError("misalignment: length mismatch");
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < m0.size(); ++i) {
        const double d = m0[i] - approx[i];
        num += d * d;
        den += m0[i] * m0[i];
    }
    if (den == 0.0)
        throw ParameterError("misalignment: zero reference response");
    return std::sqrt(num / den);
}

} // namespace nkpsaf
