#pragma once

#include <iosfwd>
#include <optional>
#include <vector>

#include "lqg/gain_network.hpp"
#include "lqg/kalman.hpp"
#include "lqg/lqr.hpp"
#include "lqg/state_space.hpp"
#include "lqg/tape.hpp"

namespace lqg {

// Separation controller: state estimator feeding the LQR gain schedule.
// Both variants share the same prediction and update structure; they differ
// only in where the update gain comes from (filter recursion vs. network).
struct Controller {
    enum class Variant { model_based, learned };

    Variant variant = Variant::model_based;
    StateSpaceModel design;
    GainSchedule schedule;
    Belief prior;
    std::optional<GainNetParams> net;  // learned variant only
};

Controller make_model_based_controller(const StateSpaceModel& design,
                                       const QuadraticCost& cost, const Matrix& x0_mean);
Controller make_learned_controller(const StateSpaceModel& design, const QuadraticCost& cost,
                                   const Matrix& x0_mean, GainNetParams params);

// Closed-loop record over horizon T.
struct Trajectory {
    Matrix prior_mean;                 // xhat_0 (control at t = 0 uses this)
    std::vector<Matrix> states;        // x_0..x_T
    std::vector<Matrix> observations;  // y_1..y_T
    std::vector<Matrix> controls;      // u_0..u_{T-1}
    std::vector<Matrix> estimates;     // xhat_1..xhat_T
    std::vector<Matrix> gains;         // K_1..K_T

    int horizon() const { return static_cast<int>(controls.size()); }
};

struct RolloutOptions {
    // Overrides the per-step update gain (diagnostics / equivalence tests).
    const std::vector<Matrix>* forced_gains = nullptr;
};

// Runs the loop control -> dynamics -> observe -> estimate for
// t = 0..T-1 against the simulator.
Trajectory rollout(const Controller& controller, Simulator& sim, const QuadraticCost& cost,
                   const RolloutOptions& options = {});

// Tape-recorded rollout of the learned variant; noise draws enter as
// constants, so the record is differentiable with respect to the lifted
// network parameters.
struct TracedTrajectory {
    Node prior_mean;
    std::vector<Node> states;
    std::vector<Node> observations;
    std::vector<Node> controls;
    std::vector<Node> estimates;
    std::vector<Node> gains;

    int horizon() const { return static_cast<int>(controls.size()); }
};

TracedTrajectory rollout_traced(const StateSpaceModel& design, const GainSchedule& schedule,
                                const Belief& prior, const GainNetArch& arch,
                                const GainNetParamNodes& params, Simulator& sim,
                                const QuadraticCost& cost, Tape& tape);

Trajectory to_plain(const TracedTrajectory& traced);

// Quadratic objective over a trajectory: running state/control terms for
// t = 0..T-1 plus the terminal term, with deviations from targets.
double lqg_loss(const Trajectory& traj, const QuadraticCost& cost);
Node lqg_loss(const TracedTrajectory& traj, const QuadraticCost& cost);

// (1/T) sum_t ||x_t - xhat_t||^2 over t = 1..T; zero for T = 0.
double state_mse(const Trajectory& traj);

// Power decibels; throws std::domain_error for non-positive values.
double to_db(double value);

// Columns: t, x_1..x_m, y_1..y_n, u_1..u_q, xhat_1..xhat_m; one row per
// t = 0..T. Cells that do not exist at a given t (y at 0, u at T) are empty.
void write_trajectory_csv(std::ostream& out, const Trajectory& traj);

}  // namespace lqg
