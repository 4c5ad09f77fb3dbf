#include "lqg/lqr.hpp"

namespace lqg {

QuadraticCost QuadraticCost::identity_weights(int m, int q, int horizon) {
    QuadraticCost cost;
    cost.q_state = Matrix::identity(m);
    cost.q_final = Matrix::identity(m);
    cost.r_control = Matrix::identity(q);
    cost.horizon = horizon;
    cost.state_target = Matrix(m, 1);
    cost.control_target = Matrix(q, 1);
    return cost;
}

GainSchedule riccati_backward(const StateSpaceModel& design, const QuadraticCost& cost) {
    const int T = cost.horizon;
    const Matrix& F = design.F;
    const Matrix& G = design.G;
    const Matrix ft = transpose(F);
    const Matrix gt = transpose(G);

    GainSchedule schedule;
    schedule.gains.resize(T);
    schedule.riccati.resize(T + 1);
    schedule.riccati[T] = cost.q_final;
    for (int t = T - 1; t >= 0; --t) {
        const Matrix& p_next = schedule.riccati[t + 1];
        const Matrix gtp = matmul(gt, p_next);
        const Matrix bracket = add(cost.r_control, matmul(gtp, G));
        schedule.gains[t] = solve_spd(bracket, matmul(gtp, F));
        const Matrix ftp = matmul(ft, p_next);
        schedule.riccati[t] = symmetrize(
            add(cost.q_state,
                sub(matmul(ftp, F), matmul(matmul(ftp, G), schedule.gains[t]))));
    }
    return schedule;
}

Matrix lqr_control(const Matrix& gain, const Matrix& estimate, const Matrix& state_target,
                   const Matrix& control_target) {
    return sub(control_target, matmul(gain, sub(estimate, state_target)));
}

}  // namespace lqg
