#include "lqg/training.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "lqg/rng.hpp"

namespace lqg {

namespace {

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    int step = 0;
};

void apply_update(std::vector<double>& theta, std::span<const double> grad,
                  const TrainConfig& cfg, AdamState& adam) {
    if (cfg.optimizer == OptimizerKind::plain_gradient) {
        for (size_t i = 0; i < theta.size(); ++i) theta[i] -= cfg.learning_rate * grad[i];
        return;
    }
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    if (adam.m.empty()) {
        adam.m.assign(theta.size(), 0.0);
        adam.v.assign(theta.size(), 0.0);
    }
    adam.step += 1;
    const double c1 = 1.0 - std::pow(beta1, adam.step);
    const double c2 = 1.0 - std::pow(beta2, adam.step);
    for (size_t i = 0; i < theta.size(); ++i) {
        adam.m[i] = beta1 * adam.m[i] + (1.0 - beta1) * grad[i];
        adam.v[i] = beta2 * adam.v[i] + (1.0 - beta2) * grad[i] * grad[i];
        theta[i] -= cfg.learning_rate * (adam.m[i] / c1) / (std::sqrt(adam.v[i] / c2) + eps);
    }
}

// Per-trajectory loss value and gradient; accumulation order is fixed by
// batch index regardless of which thread computed what.
struct BatchItem {
    double loss = 0.0;
    std::vector<double> grad;
};

uint64_t trajectory_seed(uint64_t base, int iteration, int batch_size, int j) {
    return CounterRng::derive(base, 1 + static_cast<uint64_t>(iteration) * batch_size + j);
}

}  // namespace

Node regularized_loss(std::span<const TracedTrajectory> batch, const GainNetParamNodes& params,
                      double gamma, const QuadraticCost& cost) {
    if (batch.empty()) {
        throw std::invalid_argument("regularized_loss: empty batch");
    }
    Tape& tape = *batch.front().states.front().tape();
    Node total = lqg_loss(batch[0], cost);
    for (size_t i = 1; i < batch.size(); ++i) {
        total = add(total, lqg_loss(batch[i], cost));
    }
    total = scale(total, 1.0 / static_cast<double>(batch.size()));
    if (gamma != 0.0) {
        Node reg = sum_squares(params.w.w_in);
        bool first = true;
        for (int id : params.leaf_ids) {
            if (first) {
                first = false;
                continue;
            }
            reg = add(reg, sum_squares(Node(&tape, id)));
        }
        total = add(total, scale(reg, gamma));
    }
    return total;
}

TrainReport train(const StateSpaceModel& design, const SimulatorFactory& make_simulator,
                  const QuadraticCost& cost, const GainNetArch& arch, const Matrix& x0_mean,
                  const TrainConfig& cfg) {
    if (cfg.learning_rate <= 0.0 || cfg.iterations < 0 || cfg.batch_size < 1) {
        throw std::invalid_argument("train: learning_rate must be > 0 and batch_size >= 1");
    }
    const auto started = std::chrono::steady_clock::now();

    const GainSchedule schedule = riccati_backward(design, cost);
    const Belief prior = default_prior(x0_mean);
    GainNetParams params = init_params(arch, CounterRng::derive(cfg.seed, 0));
    std::vector<double> theta = params.flatten();

    TrainReport report;
    report.loss.reserve(cfg.iterations);
    report.loss_db.reserve(cfg.iterations);
    report.grad_norm.reserve(cfg.iterations);

    AdamState adam;
    const int workers =
        std::max(1, std::min(cfg.batch_size,
                             cfg.threads > 0
                                 ? cfg.threads
                                 : static_cast<int>(std::thread::hardware_concurrency())));

    for (int iter = 0; iter < cfg.iterations; ++iter) {
        std::vector<BatchItem> batch(cfg.batch_size);
        std::vector<std::exception_ptr> errors(workers);

        auto run_range = [&](int worker) {
            try {
                for (int j = worker; j < cfg.batch_size; j += workers) {
                    Tape tape;
                    GainNetParamNodes nodes = lift_params(tape, params);
                    Simulator sim =
                        make_simulator(trajectory_seed(cfg.seed, iter, cfg.batch_size, j));
                    TracedTrajectory traced = rollout_traced(design, schedule, prior, arch,
                                                             nodes, sim, cost, tape);
                    Node loss = regularized_loss({&traced, 1}, nodes, cfg.regularization, cost);
                    batch[j].loss = scalar_value(loss);
                    GradientMap grads = backward(loss, nodes.leaf_ids);
                    batch[j].grad = flatten_gradient(grads, nodes);
                }
            } catch (...) {
                errors[worker] = std::current_exception();
            }
        };

        if (workers == 1) {
            run_range(0);
        } else {
            std::vector<std::thread> pool;
            pool.reserve(workers);
            for (int w = 0; w < workers; ++w) pool.emplace_back(run_range, w);
            for (auto& t : pool) t.join();
        }
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }

        double mean_loss = 0.0;
        std::vector<double> grad(theta.size(), 0.0);
        for (const BatchItem& item : batch) {
            mean_loss += item.loss;
            for (size_t i = 0; i < grad.size(); ++i) grad[i] += item.grad[i];
        }
        mean_loss /= cfg.batch_size;
        for (double& g : grad) g /= cfg.batch_size;

        if (!std::isfinite(mean_loss) || !all_finite(grad)) {
            throw TrainingDivergedError(
                "train: non-finite loss or gradient at iteration " + std::to_string(iter), iter);
        }

        const double norm = l2_norm(grad);
        report.loss.push_back(mean_loss);
        report.loss_db.push_back(mean_loss > 0.0
                                     ? to_db(mean_loss)
                                     : -std::numeric_limits<double>::infinity());
        report.grad_norm.push_back(norm);

        if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
            const double s = cfg.clip_norm / norm;
            for (double& g : grad) g *= s;
        }
        apply_update(theta, grad, cfg, adam);
        params = GainNetParams::unflatten(arch, theta);

        if (cfg.checkpoint_every > 0 && !cfg.checkpoint_dir.empty() &&
            (iter + 1) % cfg.checkpoint_every == 0) {
            save_checkpoint(cfg.checkpoint_dir + "/checkpoint_" + std::to_string(iter + 1) +
                                ".txt",
                            params, cfg.seed);
        }
    }

    report.final_params = std::move(params);
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

double grad_check(const StateSpaceModel& design, const SimulatorFactory& make_simulator,
                  const QuadraticCost& cost, const GainNetParams& params,
                  const Matrix& x0_mean, int directions, double epsilon, uint64_t seed) {
    const GainSchedule schedule = riccati_backward(design, cost);
    const Belief prior = default_prior(x0_mean);
    const GainNetArch& arch = params.arch;
    const double gamma = 0.0;  // pure closed-loop objective

    auto loss_at = [&](std::span<const double> flat, std::vector<double>* grad_out) {
        GainNetParams p = GainNetParams::unflatten(arch, flat);
        Tape tape;
        GainNetParamNodes nodes = lift_params(tape, p);
        Simulator sim = make_simulator(seed);
        TracedTrajectory traced =
            rollout_traced(design, schedule, prior, arch, nodes, sim, cost, tape);
        Node loss = regularized_loss({&traced, 1}, nodes, gamma, cost);
        if (grad_out != nullptr) {
            GradientMap grads = backward(loss, nodes.leaf_ids);
            *grad_out = flatten_gradient(grads, nodes);
        }
        return scalar_value(loss);
    };

    const std::vector<double> theta = params.flatten();
    std::vector<double> grad;
    loss_at(theta, &grad);

    CounterRng rng(CounterRng::derive(seed, 0x6d));
    double max_rel = 0.0;
    for (int k = 0; k < directions; ++k) {
        std::vector<double> dir(theta.size());
        for (double& d : dir) d = rng.next_gaussian();
        const double dn = l2_norm(dir);
        for (double& d : dir) d /= dn;

        double analytic = 0.0;
        for (size_t i = 0; i < theta.size(); ++i) analytic += grad[i] * dir[i];

        std::vector<double> plus = theta, minus = theta;
        for (size_t i = 0; i < theta.size(); ++i) {
            plus[i] += epsilon * dir[i];
            minus[i] -= epsilon * dir[i];
        }
        const double numeric =
            (loss_at(plus, nullptr) - loss_at(minus, nullptr)) / (2.0 * epsilon);

        const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
    return max_rel;
}

}  // namespace lqg
