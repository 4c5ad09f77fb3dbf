#pragma once

#include <span>
#include <utility>
#include <vector>

#include "lqg/matrix.hpp"
#include "lqg/state_space.hpp"

namespace lqg {

// Gaussian belief over the state.
struct Belief {
    Matrix mean;        // m x 1
    Matrix covariance;  // m x m, symmetric PSD
};

// Per-update diagnostics: innovation, its covariance, and the gain used.
struct UpdateReport {
    Matrix innovation;             // n x 1
    Matrix innovation_covariance;  // n x n, symmetric PD
    Matrix gain;                   // m x n
};

struct Prediction {
    Belief belief;                 // predicted mean / covariance
    Matrix predicted_observation;  // n x 1
};

// Default filter prior: the known initial mean with a tiny covariance.
Belief default_prior(const Matrix& x0_mean, double epsilon = 1e-6);

// Prediction step:
//   mean  = F mean + G u
//   cov   = F cov F^T + W   (symmetrized)
//   y_hat = H mean
Prediction kf_predict(const StateSpaceModel& model, const Belief& prev, const Matrix& u);

// Covariance half of the prediction, shared with gain-only recursions.
Matrix kf_predict_cov(const StateSpaceModel& model, const Matrix& covariance);

// Covariance half of the update, shared by the filter and by rollouts that
// only need the gain sequence:
//   S = H cov H^T + V,  K = cov H^T S^{-1},  cov' = cov - K S K^T
struct GainStep {
    Matrix innovation_covariance;
    Matrix gain;
    Matrix posterior_covariance;
};
GainStep kf_gain(const StateSpaceModel& model, const Matrix& predicted_covariance);

// Update step: posterior mean = predicted + K (y - y_hat), covariance from
// kf_gain. Throws SingularMatrixError when S is not positive definite.
std::pair<Belief, UpdateReport> kf_update(const StateSpaceModel& model,
                                          const Belief& predicted,
                                          const Matrix& predicted_observation,
                                          const Matrix& observation);

struct FilterResult {
    std::vector<Belief> beliefs;        // posterior at t = 1..T
    std::vector<UpdateReport> reports;  // per update
};

// Sequential predict/update over given control and observation sequences.
FilterResult filter_trajectory(const StateSpaceModel& model, const Belief& prior,
                               std::span<const Matrix> controls,
                               std::span<const Matrix> observations);

}  // namespace lqg
