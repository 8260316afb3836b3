#include "escaperoom/linalg.hpp"

#include <cmath>
#include <cstdlib>
#include <utility>

#include "escaperoom/errors.hpp"

namespace escaperoom {

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

std::vector<double> Matrix::row_sums() const {
    std::vector<double> sums(rows_, 0.0);
    for (int i = 0; i < rows_; ++i)
        for (int j = 0; j < cols_; ++j) sums[i] += (*this)(i, j);
    return sums;
}

std::vector<double> solve_dense(Matrix a, std::vector<double> b) {
    if (a.rows() != a.cols())
        throw NumericalError("solve_dense: matrix must be square");
    const int n = a.rows();
    if (static_cast<int>(b.size()) != n)
        throw NumericalError("solve_dense: dimension mismatch");

    for (int col = 0; col < n; ++col) {
        int pivot = col;
        double best = std::abs(a(col, col));
        for (int r = col + 1; r < n; ++r) {
            double v = std::abs(a(r, col));
            if (v > best) {
                best = v;
                pivot = r;
            }
        }
        if (best < 1e-13)
            throw NumericalError("solve_dense: singular system at column " + std::to_string(col));
        if (pivot != col) {
            for (int j = col; j < n; ++j) std::swap(a(col, j), a(pivot, j));
            std::swap(b[col], b[pivot]);
        }
        const double inv = 1.0 / a(col, col);
        for (int r = col + 1; r < n; ++r) {
            double factor = a(r, col) * inv;
            if (factor == 0.0) continue;
            a(r, col) = 0.0;
            for (int j = col + 1; j < n; ++j) a(r, j) -= factor * a(col, j);
            b[r] -= factor * b[col];
        }
    }

    std::vector<double> x(n, 0.0);
    for (int i = n - 1; i >= 0; --i) {
        double acc = b[i];
        for (int j = i + 1; j < n; ++j) acc -= a(i, j) * x[j];
        x[i] = acc / a(i, i);
    }
    return x;
}

double residual_inf(const Matrix& a, const std::vector<double>& x, const std::vector<double>& b) {
    double worst = 0.0;
    for (int i = 0; i < a.rows(); ++i) {
        double acc = -b[i];
        for (int j = 0; j < a.cols(); ++j) acc += a(i, j) * x[j];
        worst = std::max(worst, std::abs(acc));
    }
    return worst;
}

}  // namespace escaperoom
