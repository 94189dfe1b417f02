#pragma once

#include <vector>

#include "kronadapt/matrix.hpp"

namespace kronadapt {

/// Thin SVD of an m x n matrix: U is m x k, S has k nonincreasing nonnegative
/// entries, Vt is k x n, with k = min(m, n) and U * diag(S) * Vt ~ input.
struct SvdResult {
    Matrix U;
    std::vector<double> S;
    Matrix Vt;
};

/// One-sided Jacobi SVD. Deterministic: fixed sweep order, nonincreasing
/// singular values (ties keep column order), and a sign convention that makes
/// the first entry of largest magnitude in each left singular vector
/// nonnegative. Columns belonging to exactly-zero singular values are
/// completed deterministically from canonical basis vectors, so U is always
/// fully orthonormal.
///
/// Throws numerical_error (carrying the sweep count) if the rotations fail to
/// converge within the internal sweep budget.
SvdResult svd(const Matrix& input);

} // namespace kronadapt
