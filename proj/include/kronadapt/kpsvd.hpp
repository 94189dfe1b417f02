#pragma once

#include <vector>

#include "kronadapt/kron.hpp"
#include "kronadapt/matrix.hpp"

namespace kronadapt {

/// One weighted Kronecker term sigma * kron(U, V). KPSVD emits unit-Frobenius
/// U and V with sigma carrying all magnitude; trained terms may drift.
struct KronTerm {
    double sigma = 0.0;
    Matrix U;
    Matrix V;
};

struct KpsvdResult {
    std::vector<KronTerm> terms; // sigma nonincreasing
    KronShape shape;
    std::vector<double> spectrum; // full singular values of rearrange(W)
    double residual_fro = 0.0;    // ||W - reconstruct(terms)||_F
};

/// Truncated Kronecker-Product SVD: the top-r singular triplets of
/// rearrange(W, shape), unvectorized into m x n / p x q factors. The full
/// spectrum is always computed and kept so rank selection never needs a
/// recomputation. r may be 0 (no terms) up to min(m*n, p*q).
KpsvdResult kpsvd(const Matrix& w, const KronShape& shape, index_t r);

/// Dense sum of the kept terms, shape (m*p) x (n*q).
Matrix reconstruct(const KpsvdResult& result);

/// ||W - reconstruct(result)||_F, computed from the dense difference.
double approximation_error(const Matrix& w, const KpsvdResult& result);

} // namespace kronadapt
