#include "lqg/state_space.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace lqg {

void StateSpaceModel::validate() const {
    const int m = F.rows(), q = G.cols(), n = H.rows();
    if (F.cols() != m) {
        throw DimensionError("StateSpaceModel: F must be square, got " + F.shape_string());
    }
    if (G.rows() != m) {
        throw DimensionError("StateSpaceModel: G rows " + G.shape_string() +
                             " do not match state dim " + std::to_string(m));
    }
    if (H.cols() != m) {
        throw DimensionError("StateSpaceModel: H cols " + H.shape_string() +
                             " do not match state dim " + std::to_string(m));
    }
    if (W.rows() != m || W.cols() != m) {
        throw DimensionError("StateSpaceModel: W must be " + std::to_string(m) + "x" +
                             std::to_string(m) + ", got " + W.shape_string());
    }
    if (V.rows() != n || V.cols() != n) {
        throw DimensionError("StateSpaceModel: V must be " + std::to_string(n) + "x" +
                             std::to_string(n) + ", got " + V.shape_string());
    }
    (void)q;
}

double NoiseSpec::sigma_w_sq() const { return std::pow(10.0, sigma_w_db / 10.0); }
double NoiseSpec::sigma_v_sq() const { return std::pow(10.0, sigma_v_db / 10.0); }

std::pair<Matrix, Matrix> noise_covariances(const NoiseSpec& spec, int m, int n) {
    return {Matrix::diagonal(m, spec.sigma_w_sq()), Matrix::diagonal(n, spec.sigma_v_sq())};
}

Matrix rotation(double alpha_degrees) {
    const double a = alpha_degrees * std::numbers::pi / 180.0;
    return Matrix{{std::cos(a), -std::sin(a)}, {std::sin(a), std::cos(a)}};
}

StateSpaceModel apply_mismatch(const StateSpaceModel& design, const MismatchSpec& spec) {
    StateSpaceModel truth = design;
    if (spec.target == MismatchTarget::none) return truth;
    const Matrix& target =
        spec.target == MismatchTarget::evolution ? design.F : design.H;
    if (target.rows() != 2 || target.cols() != 2) {
        throw DimensionError("apply_mismatch: rotation mismatch requires a 2x2 target, got " +
                             target.shape_string());
    }
    const Matrix rotated = rotation(spec.alpha_degrees) * target;
    if (spec.target == MismatchTarget::evolution) {
        truth.F = rotated;
    } else {
        truth.H = rotated;
    }
    return truth;
}

Simulator::Simulator(StateSpaceModel truth, uint64_t seed, const Matrix& x0_mean,
                     double initial_state_stddev)
    : truth_(std::move(truth)), rng_(seed), x_(x0_mean) {
    truth_.validate();
    if (x0_mean.rows() != truth_.state_dim() || x0_mean.cols() != 1) {
        throw DimensionError("Simulator: x0 shape " + x0_mean.shape_string() +
                             " does not match state dim " +
                             std::to_string(truth_.state_dim()));
    }
    chol_w_ = cholesky_psd(truth_.W);
    chol_v_ = cholesky_psd(truth_.V);
    if (initial_state_stddev > 0.0) {
        x_ = x_ + initial_state_stddev * rng_.gaussian_vector(x_.rows());
    }
}

std::pair<Matrix, Matrix> Simulator::draw_noise() {
    Matrix w = chol_w_ * rng_.gaussian_vector(truth_.state_dim());
    Matrix v = chol_v_ * rng_.gaussian_vector(truth_.obs_dim());
    return {std::move(w), std::move(v)};
}

std::pair<Matrix, Matrix> Simulator::step(const Matrix& u) {
    if (u.rows() != truth_.control_dim() || u.cols() != 1) {
        throw DimensionError("Simulator::step: control shape " + u.shape_string() +
                             " does not match control dim " +
                             std::to_string(truth_.control_dim()));
    }
    auto [w, v] = draw_noise();
    x_ = add(add(matmul(truth_.F, x_), matmul(truth_.G, u)), w);
    Matrix y = add(matmul(truth_.H, x_), v);
    return {x_, std::move(y)};
}

}  // namespace lqg
