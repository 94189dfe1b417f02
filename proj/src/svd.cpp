#include "kronadapt/svd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kronadapt {

namespace {

constexpr std::size_t kMaxSweeps = 64;

struct JacobiCore {
    Matrix U;                  // m x n, orthonormal columns
    std::vector<double> sigma; // n, nonincreasing
    Matrix V;                  // n x n, orthonormal
};

// Replaces column j of U (known to carry a zero singular value) with the first
// canonical basis vector that survives orthogonalization against all other
// columns. Two Gram-Schmidt passes keep the completion orthonormal.
void complete_zero_column(Matrix& u, index_t j, const std::vector<bool>& is_valid) {
    const index_t m = u.rows();
    const index_t n = u.cols();
    for (index_t candidate = 0; candidate < m; ++candidate) {
        std::vector<double> v(m, 0.0);
        v[candidate] = 1.0;
        for (int pass = 0; pass < 2; ++pass) {
            for (index_t k = 0; k < n; ++k) {
                if (k == j || !is_valid[k]) {
                    continue;
                }
                double proj = 0.0;
                for (index_t i = 0; i < m; ++i) {
                    proj += v[i] * u(i, k);
                }
                for (index_t i = 0; i < m; ++i) {
                    v[i] -= proj * u(i, k);
                }
            }
        }
        double norm = 0.0;
        for (double x : v) {
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm > 0.5) {
            for (index_t i = 0; i < m; ++i) {
                u(i, j) = v[i] / norm;
            }
            return;
        }
    }
    throw numerical_error("svd: failed to complete orthonormal basis", 0);
}

// One-sided Jacobi on a tall-or-square matrix (rows >= cols): rotate column
// pairs until all are mutually orthogonal, then read off sigma as column norms.
JacobiCore jacobi_svd(Matrix work) {
    const index_t m = work.rows();
    const index_t n = work.cols();
    Matrix v = Matrix::identity(n);

    const double tol =
        std::numeric_limits<double>::epsilon() * std::sqrt(static_cast<double>(m));

    bool converged = (n == 1);
    std::size_t sweep = 0;
    for (; sweep < kMaxSweeps && !converged; ++sweep) {
        converged = true;
        for (index_t i = 0; i + 1 < n; ++i) {
            for (index_t j = i + 1; j < n; ++j) {
                double dot_ij = 0.0;
                double dot_ii = 0.0;
                double dot_jj = 0.0;
                for (index_t k = 0; k < m; ++k) {
                    dot_ij += work(k, i) * work(k, j);
                    dot_ii += work(k, i) * work(k, i);
                    dot_jj += work(k, j) * work(k, j);
                }
                if (dot_ii == 0.0 || dot_jj == 0.0) {
                    continue;
                }
                if (std::abs(dot_ij) <= tol * std::sqrt(dot_ii * dot_jj)) {
                    continue;
                }
                converged = false;

                const double zeta = (dot_jj - dot_ii) / (2.0 * dot_ij);
                const double t = (zeta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;

                for (index_t k = 0; k < m; ++k) {
                    const double wi = work(k, i);
                    const double wj = work(k, j);
                    work(k, i) = c * wi - s * wj;
                    work(k, j) = s * wi + c * wj;
                }
                for (index_t k = 0; k < n; ++k) {
                    const double vi = v(k, i);
                    const double vj = v(k, j);
                    v(k, i) = c * vi - s * vj;
                    v(k, j) = s * vi + c * vj;
                }
            }
        }
    }
    if (!converged) {
        throw numerical_error("svd: Jacobi sweeps did not converge", sweep);
    }

    std::vector<double> sigma(n, 0.0);
    for (index_t j = 0; j < n; ++j) {
        double norm = 0.0;
        for (index_t k = 0; k < m; ++k) {
            norm += work(k, j) * work(k, j);
        }
        sigma[j] = std::sqrt(norm);
    }

    // Stable order keeps ties deterministic.
    std::vector<index_t> order(n);
    std::iota(order.begin(), order.end(), index_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](index_t a, index_t b) { return sigma[a] > sigma[b]; });

    JacobiCore out{Matrix(m, n), std::vector<double>(n), Matrix(n, n)};
    std::vector<bool> is_valid(n, false);
    for (index_t col = 0; col < n; ++col) {
        const index_t src = order[col];
        out.sigma[col] = sigma[src];
        for (index_t k = 0; k < n; ++k) {
            out.V(k, col) = v(k, src);
        }
        if (sigma[src] > 0.0) {
            for (index_t k = 0; k < m; ++k) {
                out.U(k, col) = work(k, src) / sigma[src];
            }
            is_valid[col] = true;
        }
    }
    for (index_t col = 0; col < n; ++col) {
        if (!is_valid[col]) {
            complete_zero_column(out.U, col, is_valid);
            is_valid[col] = true;
        }
    }
    return out;
}

// First entry of largest magnitude in each left singular vector made
// nonnegative; the matching right singular vector flips with it.
void fix_signs(Matrix& u, Matrix& vt) {
    for (index_t j = 0; j < u.cols(); ++j) {
        index_t arg = 0;
        double best = 0.0;
        for (index_t i = 0; i < u.rows(); ++i) {
            if (std::abs(u(i, j)) > best) {
                best = std::abs(u(i, j));
                arg = i;
            }
        }
        if (u(arg, j) < 0.0) {
            for (index_t i = 0; i < u.rows(); ++i) {
                u(i, j) = -u(i, j);
            }
            for (index_t k = 0; k < vt.cols(); ++k) {
                vt(j, k) = -vt(j, k);
            }
        }
    }
}

} // namespace

SvdResult svd(const Matrix& input) {
    SvdResult result{Matrix(1, 1), {}, Matrix(1, 1)};
    if (input.rows() >= input.cols()) {
        JacobiCore core = jacobi_svd(input);
        result.U = std::move(core.U);
        result.S = std::move(core.sigma);
        result.Vt = transpose(core.V);
    } else {
        // input = V' S U'^T where input^T = U' S V'^T.
        JacobiCore core = jacobi_svd(transpose(input));
        result.U = std::move(core.V);
        result.S = std::move(core.sigma);
        result.Vt = transpose(core.U);
    }
    fix_signs(result.U, result.Vt);
    return result;
}

} // namespace kronadapt
