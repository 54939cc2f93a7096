#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace labcvar {

/**
 * Dense row-major matrix of doubles. Deliberately minimal: the rest of the
 * library only needs products, transposes and elementwise arithmetic, and
 * keeping the reduction order fixed (row by row, left to right) makes every
 * downstream computation reproducible bit for bit.
 */
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double value = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, value) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool all_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// a * b; shapes must agree (a.cols == b.rows), argument error otherwise.
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

/// Elementwise a + b; shapes must match exactly.
Matrix add(const Matrix& a, const Matrix& b);

/// Elementwise c * a.
Matrix scale(const Matrix& a, double c);

Matrix identity(std::size_t n);

/**
 * log(sum_j exp(v_j)) computed against the running maximum so that inputs
 * of any magnitude neither overflow nor underflow to -inf unless all do.
 * v must be non-empty and finite.
 */
double log_sum_exp(std::span<const double> v);

/// exp(v_j - log_sum_exp(v)); entries lie in (0, 1] and sum to 1 within
/// a few ulps for inputs up to |v_j| <= 700.
std::vector<double> softmax(std::span<const double> v);

} // namespace labcvar
