#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include "lqg/errors.hpp"

namespace lqg {

// Dense row-major matrix of doubles. Column vectors are n x 1 matrices.
// Values are immutable in practice: operations return fresh matrices.
class Matrix {
public:
    Matrix() = default;
    Matrix(int rows, int cols);
    Matrix(int rows, int cols, std::vector<double> entries);
    Matrix(std::initializer_list<std::initializer_list<double>> rows);

    static Matrix identity(int n);
    static Matrix diagonal(int n, double value);
    static Matrix column(std::vector<double> entries);

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    int size() const { return rows_ * cols_; }
    bool empty() const { return data_.empty(); }

    double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }
    double& operator[](int i) { return data_[i]; }
    double operator[](int i) const { return data_[i]; }

    const std::vector<double>& data() const { return data_; }
    std::vector<double>& data() { return data_; }

    bool same_shape(const Matrix& other) const {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_string() const;

private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> data_;
};

Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a);
Matrix operator*(const Matrix& a, const Matrix& b);  // matrix product
Matrix operator*(double s, const Matrix& a);

// Named forms shared with the tape-node overloads, so generic code can run
// in either domain.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix neg(const Matrix& a);
Matrix scale(const Matrix& a, double s);
Matrix transpose(const Matrix& a);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix elem_div(const Matrix& a, const Matrix& b);
Matrix sigmoid(const Matrix& a);
Matrix tanh(const Matrix& a);
Matrix relu(const Matrix& a);
Matrix concat_rows(const Matrix& a, const Matrix& b);
Matrix reshape(const Matrix& a, int rows, int cols);
Matrix sum_squares(const Matrix& a);  // 1x1
Matrix trace(const Matrix& a);        // 1x1
// Elementwise max(sqrt(a * inv_count), floor); used for running-RMS feature
// normalization. Gradient is zero on floored entries.
Matrix rms_floor(const Matrix& a, double inv_count, double floor);

// Solves a * X = b for symmetric positive definite a via Cholesky.
// Throws SingularMatrixError (with the failing pivot index) when a is not PD.
Matrix solve_spd(const Matrix& a, const Matrix& b);

// Lower Cholesky factor of a symmetric positive semi-definite matrix.
// Zero (or tiny negative, within tol) pivots produce zero columns, so exact
// PSD inputs like W = 0 are accepted; genuinely indefinite inputs throw.
Matrix cholesky_psd(const Matrix& a, double tol = 1e-12);

Matrix symmetrize(const Matrix& a);  // (a + a^T) / 2

double scalar_value(const Matrix& a);  // value of a 1x1 matrix
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);
double frobenius_norm(const Matrix& a);
bool all_finite(const Matrix& a);

}  // namespace lqg
