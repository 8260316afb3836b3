#pragma once

#include <vector>

namespace escaperoom {

/// Dense row-major matrix. Everything this toolkit solves is well under a
/// hundred unknowns, so a plain vector-backed matrix with partial-pivot
/// elimination is the whole linear-algebra story.
class Matrix {
public:
    Matrix() : rows_(0), cols_(0) {}
    Matrix(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}

    static Matrix identity(int n);

    int rows() const { return rows_; }
    int cols() const { return cols_; }

    double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const {
        return data_[static_cast<std::size_t>(i) * cols_ + j];
    }

    std::vector<double> row_sums() const;

private:
    int rows_;
    int cols_;
    std::vector<double> data_;
};

/// Solves A x = b by LU factorization with partial pivoting. A is taken by
/// value and factored in place. Throws NumericalError when A is singular
/// to working precision.
std::vector<double> solve_dense(Matrix a, std::vector<double> b);

/// max_i |(A x - b)_i|
double residual_inf(const Matrix& a, const std::vector<double>& x, const std::vector<double>& b);

}  // namespace escaperoom
