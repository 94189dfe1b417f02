#include "kronadapt/matrix.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace kronadapt {

namespace {

void check_dims(index_t rows, index_t cols) {
    if (rows == 0 || cols == 0) {
        throw dimension_error("matrix dimensions must be positive, got " + std::to_string(rows) +
                              "x" + std::to_string(cols));
    }
}

void check_finite(const std::vector<double>& values) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw argument_error("matrix entries must be finite");
        }
    }
}

} // namespace

Matrix::Matrix(index_t rows, index_t cols) : rows_(rows), cols_(cols) {
    check_dims(rows, cols);
    data_.assign(checked_extent_product(rows, cols, "matrix"), 0.0);
}

Matrix::Matrix(index_t rows, index_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
    check_dims(rows, cols);
    if (data_.size() != checked_extent_product(rows, cols, "matrix")) {
        throw dimension_error("matrix data length " + std::to_string(data_.size()) +
                              " does not match " + std::to_string(rows) + "x" + std::to_string(cols));
    }
    check_finite(data_);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ > 0 ? rows.begin()->size() : 0;
    check_dims(rows_, cols_);
    data_.reserve(rows_ * cols_);
    for (const auto& row : rows) {
        if (row.size() != cols_) {
            throw dimension_error("ragged initializer rows");
        }
        data_.insert(data_.end(), row.begin(), row.end());
    }
    check_finite(data_);
}

Matrix Matrix::identity(index_t n) {
    Matrix eye(n, n);
    for (index_t i = 0; i < n; ++i) {
        eye(i, i) = 1.0;
    }
    return eye;
}

index_t checked_extent_product(index_t a, index_t b, const char* what) {
    if (a != 0 && b > std::numeric_limits<index_t>::max() / a) {
        throw dimension_error(std::string(what) + " extent product overflows");
    }
    return a * b;
}

namespace {

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw dimension_error(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) +
                              "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                              "x" + std::to_string(b.cols()));
    }
}

} // namespace

Matrix operator+(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "add");
    Matrix out = a;
    auto ov = out.values();
    auto bv = b.values();
    for (index_t i = 0; i < ov.size(); ++i) {
        ov[i] += bv[i];
    }
    return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "subtract");
    Matrix out = a;
    auto ov = out.values();
    auto bv = b.values();
    for (index_t i = 0; i < ov.size(); ++i) {
        ov[i] -= bv[i];
    }
    return out;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows(), b.cols());
    add_matmul(out, 1.0, a, b);
    return out;
}

Matrix operator*(double scale, const Matrix& a) {
    Matrix out = a;
    for (double& v : out.values()) {
        v *= scale;
    }
    return out;
}

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (index_t i = 0; i < a.rows(); ++i) {
        for (index_t j = 0; j < a.cols(); ++j) {
            out(j, i) = a(i, j);
        }
    }
    return out;
}

void add_matmul(Matrix& c, double alpha, const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows() || c.rows() != a.rows() || c.cols() != b.cols()) {
        throw dimension_error("matmul: nonconforming shapes " + std::to_string(a.rows()) + "x" +
                              std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                              std::to_string(b.cols()));
    }
    // i-k-j order keeps the inner loop contiguous over b and c rows.
    for (index_t i = 0; i < a.rows(); ++i) {
        for (index_t k = 0; k < a.cols(); ++k) {
            const double aik = alpha * a(i, k);
            if (aik == 0.0) {
                continue;
            }
            for (index_t j = 0; j < b.cols(); ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
}

void add_matmul_at_b(Matrix& c, double alpha, const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || c.rows() != a.cols() || c.cols() != b.cols()) {
        throw dimension_error("matmul_at_b: nonconforming shapes");
    }
    for (index_t k = 0; k < a.rows(); ++k) {
        for (index_t i = 0; i < a.cols(); ++i) {
            const double aki = alpha * a(k, i);
            if (aki == 0.0) {
                continue;
            }
            for (index_t j = 0; j < b.cols(); ++j) {
                c(i, j) += aki * b(k, j);
            }
        }
    }
}

void add_matmul_a_bt(Matrix& c, double alpha, const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols() || c.rows() != a.rows() || c.cols() != b.rows()) {
        throw dimension_error("matmul_a_bt: nonconforming shapes");
    }
    for (index_t i = 0; i < a.rows(); ++i) {
        for (index_t j = 0; j < b.rows(); ++j) {
            double acc = 0.0;
            for (index_t k = 0; k < a.cols(); ++k) {
                acc += a(i, k) * b(j, k);
            }
            c(i, j) += alpha * acc;
        }
    }
}

double frobenius_norm(const Matrix& a) {
    double sum = 0.0;
    for (double v : a.values()) {
        sum += v * v;
    }
    return std::sqrt(sum);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "max_abs_diff");
    double worst = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (index_t i = 0; i < av.size(); ++i) {
        worst = std::max(worst, std::abs(av[i] - bv[i]));
    }
    return worst;
}

double dot(const Matrix& a, const Matrix& b) {
    check_same_shape(a, b, "dot");
    double sum = 0.0;
    auto av = a.values();
    auto bv = b.values();
    for (index_t i = 0; i < av.size(); ++i) {
        sum += av[i] * bv[i];
    }
    return sum;
}

} // namespace kronadapt
