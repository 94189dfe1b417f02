#include "kronadapt/kron.hpp"

#include <string>

namespace kronadapt {

void check_shape(const KronShape& shape, index_t weight_rows, index_t weight_cols) {
    if (shape.m == 0 || shape.n == 0 || shape.p == 0 || shape.q == 0) {
        throw dimension_error("kron shape factors must be positive");
    }
    checked_extent_product(shape.m, shape.p, "kron shape rows");
    checked_extent_product(shape.n, shape.q, "kron shape cols");
    if (shape.weight_rows() != weight_rows) {
        throw dimension_error("kron shape rows m*p = " + std::to_string(shape.weight_rows()) +
                              " does not match weight rows " + std::to_string(weight_rows));
    }
    if (shape.weight_cols() != weight_cols) {
        throw dimension_error("kron shape cols n*q = " + std::to_string(shape.weight_cols()) +
                              " does not match weight cols " + std::to_string(weight_cols));
    }
}

Matrix kron(const Matrix& a, const Matrix& b) {
    const index_t rows = checked_extent_product(a.rows(), b.rows(), "kron result rows");
    const index_t cols = checked_extent_product(a.cols(), b.cols(), "kron result cols");
    checked_extent_product(rows, cols, "kron result");
    Matrix out(rows, cols);
    for (index_t i = 0; i < a.rows(); ++i) {
        for (index_t j = 0; j < a.cols(); ++j) {
            const double aij = a(i, j);
            if (aij == 0.0) {
                continue;
            }
            for (index_t s = 0; s < b.rows(); ++s) {
                for (index_t t = 0; t < b.cols(); ++t) {
                    out(i * b.rows() + s, j * b.cols() + t) = aij * b(s, t);
                }
            }
        }
    }
    return out;
}

Matrix vec(const Matrix& x) {
    Matrix out(x.rows() * x.cols(), 1);
    for (index_t j = 0; j < x.cols(); ++j) {
        for (index_t i = 0; i < x.rows(); ++i) {
            out(i + j * x.rows(), 0) = x(i, j);
        }
    }
    return out;
}

Matrix unvec(const Matrix& x, index_t rows, index_t cols) {
    if (x.cols() != 1) {
        throw dimension_error("unvec: input must be a column vector, got " +
                              std::to_string(x.cols()) + " columns");
    }
    if (x.rows() != checked_extent_product(rows, cols, "unvec")) {
        throw dimension_error("unvec: vector length " + std::to_string(x.rows()) +
                              " does not match " + std::to_string(rows) + "x" +
                              std::to_string(cols));
    }
    Matrix out(rows, cols);
    for (index_t j = 0; j < cols; ++j) {
        for (index_t i = 0; i < rows; ++i) {
            out(i, j) = x(i + j * rows, 0);
        }
    }
    return out;
}

Matrix rearrange(const Matrix& w, const KronShape& shape) {
    check_shape(shape, w.rows(), w.cols());
    Matrix out(shape.left_size(), shape.right_size());
    for (index_t j = 0; j < shape.n; ++j) {
        for (index_t i = 0; i < shape.m; ++i) {
            const index_t row = i + j * shape.m;
            for (index_t t = 0; t < shape.q; ++t) {
                for (index_t s = 0; s < shape.p; ++s) {
                    out(row, s + t * shape.p) = w(i * shape.p + s, j * shape.q + t);
                }
            }
        }
    }
    return out;
}

Matrix rearrange_inverse(const Matrix& r, const KronShape& shape) {
    if (r.rows() != shape.left_size() || r.cols() != shape.right_size()) {
        throw dimension_error("rearrange_inverse: input shape " + std::to_string(r.rows()) + "x" +
                              std::to_string(r.cols()) + " does not match (m*n)x(p*q)");
    }
    Matrix out(shape.weight_rows(), shape.weight_cols());
    for (index_t j = 0; j < shape.n; ++j) {
        for (index_t i = 0; i < shape.m; ++i) {
            const index_t row = i + j * shape.m;
            for (index_t t = 0; t < shape.q; ++t) {
                for (index_t s = 0; s < shape.p; ++s) {
                    out(i * shape.p + s, j * shape.q + t) = r(row, s + t * shape.p);
                }
            }
        }
    }
    return out;
}

} // namespace kronadapt
