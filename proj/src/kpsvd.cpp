#include "kronadapt/kpsvd.hpp"

#include <cmath>
#include <string>

#include "kronadapt/svd.hpp"

namespace kronadapt {

KpsvdResult kpsvd(const Matrix& w, const KronShape& shape, index_t r) {
    check_shape(shape, w.rows(), w.cols());
    const index_t full = std::min(shape.left_size(), shape.right_size());
    if (r > full) {
        throw argument_error("kpsvd: rank " + std::to_string(r) + " exceeds min(m*n, p*q) = " +
                             std::to_string(full));
    }

    const SvdResult factorization = svd(rearrange(w, shape));

    KpsvdResult result;
    result.shape = shape;
    result.spectrum = factorization.S;
    result.terms.reserve(r);
    for (index_t k = 0; k < r; ++k) {
        Matrix left(shape.left_size(), 1);
        for (index_t i = 0; i < shape.left_size(); ++i) {
            left(i, 0) = factorization.U(i, k);
        }
        Matrix right(shape.right_size(), 1);
        for (index_t i = 0; i < shape.right_size(); ++i) {
            right(i, 0) = factorization.Vt(k, i);
        }
        result.terms.push_back(KronTerm{factorization.S[k], unvec(left, shape.m, shape.n),
                                        unvec(right, shape.p, shape.q)});
    }
    result.residual_fro = approximation_error(w, result);
    return result;
}

Matrix reconstruct(const KpsvdResult& result) {
    Matrix out(result.shape.weight_rows(), result.shape.weight_cols());
    for (const KronTerm& term : result.terms) {
        const Matrix block = kron(term.U, term.V);
        auto ov = out.values();
        auto bv = block.values();
        for (index_t i = 0; i < ov.size(); ++i) {
            ov[i] += term.sigma * bv[i];
        }
    }
    return out;
}

double approximation_error(const Matrix& w, const KpsvdResult& result) {
    if (w.rows() != result.shape.weight_rows() || w.cols() != result.shape.weight_cols()) {
        throw dimension_error("approximation_error: weight shape does not match decomposition");
    }
    return frobenius_norm(w - reconstruct(result));
}

} // namespace kronadapt
