#pragma once

#include "kronadapt/matrix.hpp"

namespace kronadapt {

/// Factor dimensions for a Kronecker-structured update: the composed matrix
/// kron(A, B) with A m x n and B p x q has shape (m*p) x (n*q).
struct KronShape {
    index_t m = 1;
    index_t n = 1;
    index_t p = 1;
    index_t q = 1;

    index_t weight_rows() const { return m * p; }
    index_t weight_cols() const { return n * q; }
    index_t left_size() const { return m * n; }
    index_t right_size() const { return p * q; }

    bool operator==(const KronShape&) const = default;
};

/// Validates that every factor dimension is positive and that shape composes
/// to weight_rows x weight_cols. Throws dimension_error otherwise.
void check_shape(const KronShape& shape, index_t weight_rows, index_t weight_cols);

/// Kronecker product: block (i, j) of the result is a(i, j) * B.
Matrix kron(const Matrix& a, const Matrix& b);

/// Column-major vectorization: X(i, j) lands at position i + j * X.rows().
/// This is the convention under which kron(A, B) * vec(X) = vec(B * X * A^T).
Matrix vec(const Matrix& x);

/// Exact inverse of vec. The input must be a column vector of length
/// rows * cols.
Matrix unvec(const Matrix& x, index_t rows, index_t cols);

/// The nearest-Kronecker block rearrangement R(W): for W of shape
/// (m*p) x (n*q), row i + j*m of the result is vec(W_ij)^T where W_ij is the
/// p x q block of W at block position (i, j). Satisfies
/// R(kron(A, B)) = vec(A) * vec(B)^T exactly, which turns the nearest
/// Kronecker-sum approximation into an ordinary SVD problem.
Matrix rearrange(const Matrix& w, const KronShape& shape);

/// Inverse of rearrange: maps an (m*n) x (p*q) matrix back to (m*p) x (n*q).
Matrix rearrange_inverse(const Matrix& r, const KronShape& shape);

} // namespace kronadapt
