#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace hct {

using Label = std::int64_t;

/// Dense row-major matrix of doubles.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    std::vector<double>& data() noexcept { return data_; }
    const std::vector<double>& data() const noexcept { return data_; }

    bool all_finite() const noexcept;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// a * b with a fixed per-row summation order (row results do not depend on
/// how many rows are processed together).
Matrix matmul(const Matrix& a, const Matrix& b);

/// a^T * b.
Matrix matmul_transpose_a(const Matrix& a, const Matrix& b);

/// a * b^T.
Matrix matmul_transpose_b(const Matrix& a, const Matrix& b);

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> indices);

double squared_distance(std::span<const double> a, std::span<const double> b);

}  // namespace hct
