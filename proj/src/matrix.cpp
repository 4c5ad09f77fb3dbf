#include "lqg/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lqg {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() +
                             " vs " + b.shape_string());
    }
}

}  // namespace

Matrix::Matrix(int rows, int cols)
    : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {
    if (rows <= 0 || cols <= 0) {
        throw DimensionError("Matrix: dimensions must be positive, got " + shape_string());
    }
}

Matrix::Matrix(int rows, int cols, std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
    if (rows <= 0 || cols <= 0) {
        throw DimensionError("Matrix: dimensions must be positive, got " + shape_string());
    }
    if (data_.size() != static_cast<size_t>(rows) * cols) {
        throw DimensionError("Matrix: entry count " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string());
    }
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    if (rows_ <= 0 || cols_ <= 0) {
        throw DimensionError("Matrix: empty initializer");
    }
    data_.reserve(static_cast<size_t>(rows_) * cols_);
    for (const auto& row : rows) {
        if (static_cast<int>(row.size()) != cols_) {
            throw DimensionError("Matrix: ragged initializer rows");
        }
        data_.insert(data_.end(), row.begin(), row.end());
    }
}

Matrix Matrix::identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::diagonal(int n, double value) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = value;
    return m;
}

Matrix Matrix::column(std::vector<double> entries) {
    const int n = static_cast<int>(entries.size());
    return Matrix(n, 1, std::move(entries));
}

std::string Matrix::shape_string() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

Matrix neg(const Matrix& a) {
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out[i] = -out[i];
    return out;
}

Matrix scale(const Matrix& a, double s) {
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out[i] *= s;
    return out;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError("matmul: " + a.shape_string() + " * " + b.shape_string());
    }
    Matrix out(a.rows(), b.cols());
    const int n = a.rows(), k = a.cols(), m = b.cols();
    for (int i = 0; i < n; ++i) {
        for (int p = 0; p < k; ++p) {
            const double aip = a(i, p);
            if (aip == 0.0) continue;
            for (int j = 0; j < m; ++j) out(i, j) += aip * b(p, j);
        }
    }
    return out;
}

Matrix operator+(const Matrix& a, const Matrix& b) { return add(a, b); }
Matrix operator-(const Matrix& a, const Matrix& b) { return sub(a, b); }
Matrix operator-(const Matrix& a) { return neg(a); }
Matrix operator*(const Matrix& a, const Matrix& b) { return matmul(a, b); }
Matrix operator*(double s, const Matrix& a) { return scale(a, s); }

Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
    return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Matrix elem_div(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "elem_div");
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out[i] /= b[i];
    return out;
}

Matrix sigmoid(const Matrix& a) {
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-out[i]));
    return out;
}

Matrix tanh(const Matrix& a) {
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out[i] = std::tanh(out[i]);
    return out;
}

Matrix relu(const Matrix& a) {
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) out[i] = out[i] > 0.0 ? out[i] : 0.0;
    return out;
}

Matrix concat_rows(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) {
        throw DimensionError("concat_rows: " + a.shape_string() + " over " + b.shape_string());
    }
    Matrix out(a.rows() + b.rows(), a.cols());
    std::copy(a.data().begin(), a.data().end(), out.data().begin());
    std::copy(b.data().begin(), b.data().end(), out.data().begin() + a.size());
    return out;
}

Matrix reshape(const Matrix& a, int rows, int cols) {
    if (rows * cols != a.size()) {
        throw DimensionError("reshape: " + a.shape_string() + " to " + std::to_string(rows) +
                             "x" + std::to_string(cols));
    }
    return Matrix(rows, cols, a.data());
}

Matrix sum_squares(const Matrix& a) {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return Matrix(1, 1, {s});
}

Matrix trace(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("trace: matrix not square, " + a.shape_string());
    }
    double s = 0.0;
    for (int i = 0; i < a.rows(); ++i) s += a(i, i);
    return Matrix(1, 1, {s});
}

Matrix rms_floor(const Matrix& a, double inv_count, double floor) {
    Matrix out = a;
    for (int i = 0; i < out.size(); ++i) {
        out[i] = std::max(std::sqrt(out[i] * inv_count), floor);
    }
    return out;
}

namespace {

// Lower Cholesky; strict = throw on any non-positive pivot, otherwise
// tolerate pivots in [-tol, tol] by zeroing the column (PSD inputs).
Matrix cholesky_impl(const Matrix& a, bool strict, double tol) {
    if (a.rows() != a.cols()) {
        throw DimensionError("cholesky: matrix not square, " + a.shape_string());
    }
    const int n = a.rows();
    Matrix l(n, n);
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
        if (strict ? d <= 0.0 : d < -tol * std::max(1.0, std::abs(a(j, j)))) {
            throw SingularMatrixError(
                "cholesky: non-positive pivot " + std::to_string(d) + " at index " +
                    std::to_string(j),
                j);
        }
        if (d <= 0.0) {
            continue;  // PSD rank deficiency: leave column zero
        }
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
            l(i, j) = s / ljj;
        }
    }
    return l;
}

}  // namespace

Matrix cholesky_psd(const Matrix& a, double tol) { return cholesky_impl(a, false, tol); }

Matrix solve_spd(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) {
        throw DimensionError("solve_spd: " + a.shape_string() + " \\ " + b.shape_string());
    }
    const Matrix l = cholesky_impl(symmetrize(a), true, 0.0);
    const int n = a.rows(), m = b.cols();
    Matrix x = b;
    // forward substitution: L z = b
    for (int c = 0; c < m; ++c) {
        for (int i = 0; i < n; ++i) {
            double s = x(i, c);
            for (int k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    // back substitution: L^T x = z
    for (int c = 0; c < m; ++c) {
        for (int i = n - 1; i >= 0; --i) {
            double s = x(i, c);
            for (int k = i + 1; k < n; ++k) s -= l(k, i) * x(k, c);
            x(i, c) = s / l(i, i);
        }
    }
    return x;
}

Matrix symmetrize(const Matrix& a) {
    if (a.rows() != a.cols()) {
        throw DimensionError("symmetrize: matrix not square, " + a.shape_string());
    }
    Matrix out(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) out(i, j) = 0.5 * (a(i, j) + a(j, i));
    return out;
}

double scalar_value(const Matrix& a) {
    if (a.rows() != 1 || a.cols() != 1) {
        throw DimensionError("scalar_value: expected 1x1, got " + a.shape_string());
    }
    return a[0];
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "max_abs_diff");
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double frobenius_norm(const Matrix& a) {
    double s = 0.0;
    for (int i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return std::sqrt(s);
}

bool all_finite(const Matrix& a) {
    for (int i = 0; i < a.size(); ++i) {
        if (!std::isfinite(a[i])) return false;
    }
    return true;
}

}  // namespace lqg
