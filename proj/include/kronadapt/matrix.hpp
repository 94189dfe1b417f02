#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "kronadapt/errors.hpp"

namespace kronadapt {

using index_t = std::size_t;

/// Dense row-major matrix of binary64 scalars. Dimensions are at least 1x1;
/// constructors reject non-finite entries.
class Matrix {
public:
    Matrix(index_t rows, index_t cols);
    Matrix(index_t rows, index_t cols, std::vector<double> values);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(index_t n);

    index_t rows() const { return rows_; }
    index_t cols() const { return cols_; }
    index_t size() const { return data_.size(); }

    double operator()(index_t i, index_t j) const { return data_[i * cols_ + j]; }
    double& operator()(index_t i, index_t j) { return data_[i * cols_ + j]; }

    std::span<const double> values() const { return data_; }
    std::span<double> values() { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }

    bool operator==(const Matrix& other) const = default;

private:
    index_t rows_ = 0;
    index_t cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator*(double scale, const Matrix& a);

Matrix transpose(const Matrix& a);

/// C += alpha * A * B without allocating. Shapes must conform.
void add_matmul(Matrix& c, double alpha, const Matrix& a, const Matrix& b);

/// C += alpha * A^T * B without allocating.
void add_matmul_at_b(Matrix& c, double alpha, const Matrix& a, const Matrix& b);

/// C += alpha * A * B^T without allocating.
void add_matmul_a_bt(Matrix& c, double alpha, const Matrix& a, const Matrix& b);

double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
double dot(const Matrix& a, const Matrix& b);

/// Checked product of two extents; throws dimension_error on overflow.
index_t checked_extent_product(index_t a, index_t b, const char* what);

} // namespace kronadapt
