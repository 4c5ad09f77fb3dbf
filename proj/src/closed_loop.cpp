#include "lqg/closed_loop.hpp"

#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lqg {

namespace {

template <class V>
struct RecordT {
    V prior_mean;
    std::vector<V> states;
    std::vector<V> observations;
    std::vector<V> controls;
    std::vector<V> estimates;
    std::vector<V> gains;
};

// Gain from the design-model filter recursion (Eq.-form covariance updates);
// the covariance path is data independent.
struct ModelBasedSource {
    const StateSpaceModel* design;
    Matrix cov;

    template <class D, class V>
    V gain(const D& dom, int, const V&, const V&) {
        cov = kf_predict_cov(*design, cov);
        GainStep g = kf_gain(*design, cov);
        cov = g.posterior_covariance;
        return dom.constant(g.gain);
    }
    template <class V>
    void after_update(const V&, const V&, const V&) {}
};

template <class D, class V = typename D::Value>
struct LearnedSource {
    const GainNetWeightsT<V>* weights;
    const GainNetArch* arch;
    GainNetStateT<V> state;

    V gain(const D& dom, int, const V& y, const V& y_pred) {
        const V features = build_features(dom, state, y, y_pred);
        return gain_step(dom, *weights, *arch, state, features);
    }
    void after_update(const V& y, const V& x_pred, const V& x_post) {
        advance_gain_context(state, y, x_pred, x_post);
    }
};

struct ForcedSource {
    const std::vector<Matrix>* gains;

    template <class D, class V>
    V gain(const D& dom, int t, const V&, const V&) {
        return dom.constant((*gains)[t]);
    }
    template <class V>
    void after_update(const V&, const V&, const V&) {}
};

template <class D, class Source, class V = typename D::Value>
RecordT<V> rollout_core(const D& dom, const StateSpaceModel& design,
                        const GainSchedule& schedule, const Belief& prior, Simulator& sim,
                        const QuadraticCost& cost, Source& source) {
    const int T = cost.horizon;
    if (static_cast<int>(schedule.gains.size()) < T) {
        throw DimensionError("rollout: schedule has " + std::to_string(schedule.gains.size()) +
                             " gains for horizon " + std::to_string(T));
    }
    const StateSpaceModel& truth = sim.truth();

    const V f_truth = dom.constant(truth.F);
    const V g_truth = dom.constant(truth.G);
    const V h_truth = dom.constant(truth.H);
    const V f_design = dom.constant(design.F);
    const V g_design = dom.constant(design.G);
    const V h_design = dom.constant(design.H);
    const V state_target = dom.constant(cost.state_target);
    const V control_target = dom.constant(cost.control_target);

    RecordT<V> rec;
    rec.states.reserve(T + 1);
    rec.observations.reserve(T);
    rec.controls.reserve(T);
    rec.estimates.reserve(T);
    rec.gains.reserve(T);

    V x = dom.constant(sim.state());
    V x_hat = dom.constant(prior.mean);
    rec.prior_mean = x_hat;
    rec.states.push_back(x);

    for (int t = 0; t < T; ++t) {
        // u_t = u_target - L_t (xhat_t - x_target)
        const V l_t = dom.constant(schedule.gains[t]);
        const V u = sub(control_target, matmul(l_t, sub(x_hat, state_target)));

        auto [w, v] = sim.draw_noise();
        x = add(add(matmul(f_truth, x), matmul(g_truth, u)), dom.constant(std::move(w)));
        const V y = add(matmul(h_truth, x), dom.constant(std::move(v)));

        const V x_pred = add(matmul(f_design, x_hat), matmul(g_design, u));
        const V y_pred = matmul(h_design, x_pred);
        const V k = source.gain(dom, t, y, y_pred);
        const V innovation = sub(y, y_pred);
        x_hat = add(x_pred, matmul(k, innovation));
        source.after_update(y, x_pred, x_hat);

        rec.controls.push_back(u);
        rec.states.push_back(x);
        rec.observations.push_back(y);
        rec.estimates.push_back(x_hat);
        rec.gains.push_back(k);
    }
    return rec;
}

template <class Traj>
Traj from_record(RecordT<std::remove_reference_t<decltype(Traj{}.prior_mean)>>&& rec) {
    Traj traj;
    traj.prior_mean = std::move(rec.prior_mean);
    traj.states = std::move(rec.states);
    traj.observations = std::move(rec.observations);
    traj.controls = std::move(rec.controls);
    traj.estimates = std::move(rec.estimates);
    traj.gains = std::move(rec.gains);
    return traj;
}

template <class D, class Traj, class V = typename D::Value>
V loss_impl(const D& dom, const Traj& traj, const QuadraticCost& cost) {
    const int T = traj.horizon();
    if (static_cast<int>(traj.states.size()) != T + 1) {
        throw DimensionError("lqg_loss: " + std::to_string(traj.states.size()) +
                             " states for horizon " + std::to_string(T));
    }
    const V q = dom.constant(cost.q_state);
    const V qf = dom.constant(cost.q_final);
    const V r = dom.constant(cost.r_control);
    const V x_target = dom.constant(cost.state_target);
    const V u_target = dom.constant(cost.control_target);

    V total = dom.constant(Matrix(1, 1));
    for (int t = 0; t < T; ++t) {
        const V x_dev = sub(traj.states[t], x_target);
        total = add(total, matmul(transpose(x_dev), matmul(q, x_dev)));
        const V u_dev = sub(traj.controls[t], u_target);
        total = add(total, matmul(transpose(u_dev), matmul(r, u_dev)));
    }
    const V x_dev = sub(traj.states[T], x_target);
    return add(total, matmul(transpose(x_dev), matmul(qf, x_dev)));
}

void append_double(std::string& line, double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    line.append(buf, res.ptr);
}

}  // namespace

Controller make_model_based_controller(const StateSpaceModel& design,
                                       const QuadraticCost& cost, const Matrix& x0_mean) {
    Controller c;
    c.variant = Controller::Variant::model_based;
    c.design = design;
    c.schedule = riccati_backward(design, cost);
    c.prior = default_prior(x0_mean);
    return c;
}

Controller make_learned_controller(const StateSpaceModel& design, const QuadraticCost& cost,
                                   const Matrix& x0_mean, GainNetParams params) {
    Controller c;
    c.variant = Controller::Variant::learned;
    c.design = design;
    c.schedule = riccati_backward(design, cost);
    c.prior = default_prior(x0_mean);
    c.net = std::move(params);
    return c;
}

Trajectory rollout(const Controller& controller, Simulator& sim, const QuadraticCost& cost,
                   const RolloutOptions& options) {
    MatrixDomain dom;
    if (options.forced_gains != nullptr) {
        if (static_cast<int>(options.forced_gains->size()) < cost.horizon) {
            throw DimensionError("rollout: forced gain list shorter than horizon");
        }
        ForcedSource source{options.forced_gains};
        return from_record<Trajectory>(
            rollout_core(dom, controller.design, controller.schedule, controller.prior, sim,
                         cost, source));
    }
    if (controller.variant == Controller::Variant::model_based) {
        ModelBasedSource source{&controller.design, controller.prior.covariance};
        return from_record<Trajectory>(
            rollout_core(dom, controller.design, controller.schedule, controller.prior, sim,
                         cost, source));
    }
    if (!controller.net.has_value()) {
        throw std::invalid_argument("rollout: learned controller has no parameters");
    }
    const GainNetArch& arch = controller.net->arch;
    LearnedSource<MatrixDomain> source{&controller.net->w, &arch,
                                       initial_gain_state(dom, arch)};
    return from_record<Trajectory>(rollout_core(
        dom, controller.design, controller.schedule, controller.prior, sim, cost, source));
}

TracedTrajectory rollout_traced(const StateSpaceModel& design, const GainSchedule& schedule,
                                const Belief& prior, const GainNetArch& arch,
                                const GainNetParamNodes& params, Simulator& sim,
                                const QuadraticCost& cost, Tape& tape) {
    TapeDomain dom{&tape};
    LearnedSource<TapeDomain> source{&params.w, &arch, initial_gain_state(dom, arch)};
    return from_record<TracedTrajectory>(
        rollout_core(dom, design, schedule, prior, sim, cost, source));
}

Trajectory to_plain(const TracedTrajectory& traced) {
    Trajectory traj;
    traj.prior_mean = traced.prior_mean.value();
    auto values = [](const std::vector<Node>& nodes) {
        std::vector<Matrix> out;
        out.reserve(nodes.size());
        for (const Node& n : nodes) out.push_back(n.value());
        return out;
    };
    traj.states = values(traced.states);
    traj.observations = values(traced.observations);
    traj.controls = values(traced.controls);
    traj.estimates = values(traced.estimates);
    traj.gains = values(traced.gains);
    return traj;
}

double lqg_loss(const Trajectory& traj, const QuadraticCost& cost) {
    MatrixDomain dom;
    return scalar_value(loss_impl(dom, traj, cost));
}

Node lqg_loss(const TracedTrajectory& traj, const QuadraticCost& cost) {
    TapeDomain dom{traj.states.front().tape()};
    return loss_impl(dom, traj, cost);
}

double state_mse(const Trajectory& traj) {
    const int T = traj.horizon();
    if (T == 0) return 0.0;
    double total = 0.0;
    for (int t = 0; t < T; ++t) {
        const Matrix err = sub(traj.states[t + 1], traj.estimates[t]);
        total += scalar_value(sum_squares(err));
    }
    return total / T;
}

double to_db(double value) {
    if (!(value > 0.0)) {
        throw std::domain_error("to_db: value must be positive, got " + std::to_string(value));
    }
    return 10.0 * std::log10(value);
}

void write_trajectory_csv(std::ostream& out, const Trajectory& traj) {
    const int m = traj.states.front().rows();
    const int n = traj.observations.empty() ? traj.prior_mean.rows() : traj.observations.front().rows();
    const int q = traj.controls.empty() ? 1 : traj.controls.front().rows();
    const int T = traj.horizon();

    std::string line = "t";
    for (int i = 1; i <= m; ++i) line += ",x_" + std::to_string(i);
    for (int i = 1; i <= n; ++i) line += ",y_" + std::to_string(i);
    for (int i = 1; i <= q; ++i) line += ",u_" + std::to_string(i);
    for (int i = 1; i <= m; ++i) line += ",xhat_" + std::to_string(i);
    out << line << "\n";

    for (int t = 0; t <= T; ++t) {
        line = std::to_string(t);
        for (int i = 0; i < m; ++i) {
            line += ',';
            append_double(line, traj.states[t][i]);
        }
        for (int i = 0; i < n; ++i) {
            line += ',';
            if (t >= 1) append_double(line, traj.observations[t - 1][i]);
        }
        for (int i = 0; i < q; ++i) {
            line += ',';
            if (t < T) append_double(line, traj.controls[t][i]);
        }
        for (int i = 0; i < m; ++i) {
            line += ',';
            append_double(line, t == 0 ? traj.prior_mean[i] : traj.estimates[t - 1][i]);
        }
        out << line << "\n";
    }
}

}  // namespace lqg
