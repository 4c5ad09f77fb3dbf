#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lqg/closed_loop.hpp"
#include "lqg/gain_network.hpp"
#include "lqg/lqr.hpp"
#include "lqg/state_space.hpp"

namespace lqg {

enum class OptimizerKind { adaptive_moment, plain_gradient };

struct TrainConfig {
    double learning_rate = 1e-3;
    int iterations = 300;
    int batch_size = 32;              // fresh simulator seeds per iteration
    double regularization = 1e-4;     // coefficient on the squared weight norm
    OptimizerKind optimizer = OptimizerKind::adaptive_moment;
    uint64_t seed = 1;
    int checkpoint_every = 0;         // iterations between checkpoints, 0 = off
    std::string checkpoint_dir;       // destination when checkpoint_every > 0
    double clip_norm = 10.0;          // gradient-norm clip, 0 = off
    int threads = 0;                  // 0 = hardware concurrency
};

struct TrainReport {
    std::vector<double> loss;       // per-iteration batch mean (regularized)
    std::vector<double> loss_db;
    std::vector<double> grad_norm;  // pre-clip
    GainNetParams final_params;
    double wall_time_seconds = 0.0;
};

// Yields a fresh simulator for a given stream seed; restarting with new
// seeds produces new trajectories.
using SimulatorFactory = std::function<Simulator(uint64_t seed)>;

// Batch mean of the quadratic objective plus gamma * ||params||^2, built on
// the tape the trajectories were recorded on.
Node regularized_loss(std::span<const TracedTrajectory> batch, const GainNetParamNodes& params,
                      double gamma, const QuadraticCost& cost);

// Gradient training of the gain network on the regularized closed-loop
// objective. Rollouts within an iteration run on independent tapes (in
// parallel); gradients are averaged in batch order, so results are
// deterministic for a fixed config. Throws TrainingDivergedError on
// non-finite loss or gradient.
TrainReport train(const StateSpaceModel& design, const SimulatorFactory& make_simulator,
                  const QuadraticCost& cost, const GainNetArch& arch, const Matrix& x0_mean,
                  const TrainConfig& cfg);

// Compares the tape gradient of the fixed-seed closed-loop loss against
// central finite differences along random directions; returns the maximum
// relative error.
double grad_check(const StateSpaceModel& design, const SimulatorFactory& make_simulator,
                  const QuadraticCost& cost, const GainNetParams& params,
                  const Matrix& x0_mean, int directions, double epsilon, uint64_t seed);

}  // namespace lqg
