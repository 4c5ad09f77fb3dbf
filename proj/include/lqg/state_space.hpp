#pragma once

#include <cstdint>
#include <utility>

#include "lqg/matrix.hpp"
#include "lqg/rng.hpp"

namespace lqg {

// Discrete-time linear-Gaussian state-space model:
//   x_t = F x_{t-1} + G u_{t-1} + w_t,  w ~ N(0, W)
//   y_t = H x_t + v_t,                  v ~ N(0, V)
struct StateSpaceModel {
    Matrix F;  // m x m evolution
    Matrix G;  // m x q control
    Matrix H;  // n x m observation
    Matrix W;  // m x m process-noise covariance (PSD)
    Matrix V;  // n x n observation-noise covariance (PD)

    int state_dim() const { return F.rows(); }
    int control_dim() const { return G.cols(); }
    int obs_dim() const { return H.rows(); }

    void validate() const;  // throws DimensionError on inconsistent shapes
};

// Noise levels in power decibels: variance = 10^(dB/10).
struct NoiseSpec {
    double sigma_w_db = 0.0;
    double sigma_v_db = 0.0;

    double sigma_w_sq() const;
    double sigma_v_sq() const;
};

std::pair<Matrix, Matrix> noise_covariances(const NoiseSpec& spec, int m, int n);

enum class MismatchTarget { none, evolution, observation };

struct MismatchSpec {
    MismatchTarget target = MismatchTarget::none;
    double alpha_degrees = 0.0;
};

// 2x2 rotation by alpha degrees (orthogonal, det 1).
Matrix rotation(double alpha_degrees);

// Ground truth from a design model: the targeted matrix is left-multiplied
// by the rotation; all other fields are copied. target == none is identity.
StateSpaceModel apply_mismatch(const StateSpaceModel& design, const MismatchSpec& spec);

// Seeded trajectory generator for a ground-truth model. Identical seed and
// control sequence reproduce the identical trajectory.
class Simulator {
public:
    // initial_state_stddev > 0 draws x0 ~ N(x0_mean, stddev^2 I) from the
    // simulator's own stream; 0 keeps x0 deterministic.
    Simulator(StateSpaceModel truth, uint64_t seed, const Matrix& x0_mean,
              double initial_state_stddev = 0.0);

    // Advances one step with fresh noise draws; returns (x_t, y_t).
    std::pair<Matrix, Matrix> step(const Matrix& u);

    // Draws the next (w, v) pair without advancing the state. Used by
    // rollouts that carry the state themselves (e.g. on a tape).
    std::pair<Matrix, Matrix> draw_noise();

    const Matrix& state() const { return x_; }
    const StateSpaceModel& truth() const { return truth_; }

private:
    StateSpaceModel truth_;
    CounterRng rng_;
    Matrix x_;
    Matrix chol_w_;
    Matrix chol_v_;
};

}  // namespace lqg
