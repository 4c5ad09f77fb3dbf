#pragma once

#include <vector>

#include "lqg/matrix.hpp"
#include "lqg/state_space.hpp"

namespace lqg {

// Finite-horizon quadratic objective:
//   J = (x_T - xt)^T Qf (x_T - xt)
//     + sum_{t=0}^{T-1} (x_t - xt)^T Q (x_t - xt) + (u_t - ut)^T R (u_t - ut)
// with Q, Qf PSD and R PD.
struct QuadraticCost {
    Matrix q_state;        // m x m
    Matrix q_final;        // m x m
    Matrix r_control;      // q x q
    int horizon = 0;       // T
    Matrix state_target;   // m x 1, zero by default
    Matrix control_target; // q x 1, zero by default

    // Identity state weights, unit control weight, zero targets.
    static QuadraticCost identity_weights(int m, int q, int horizon);
};

// Backward Riccati sweep output: gains L_0..L_{T-1} and cost-to-go P_0..P_T.
struct GainSchedule {
    std::vector<Matrix> gains;    // q x m each, length T
    std::vector<Matrix> riccati;  // m x m each, length T + 1
};

// Computes the full schedule backward from P_T = Qf:
//   L_t = (R + G^T P_{t+1} G)^{-1} G^T P_{t+1} F
//   P_t = Q + F^T P_{t+1} F - F^T P_{t+1} G L_t
// Throws SingularMatrixError when the bracket is not positive definite.
GainSchedule riccati_backward(const StateSpaceModel& design, const QuadraticCost& cost);

// Control law around targets: u = ut - L (xhat - xt).
Matrix lqr_control(const Matrix& gain, const Matrix& estimate, const Matrix& state_target,
                   const Matrix& control_target);

}  // namespace lqg
