#include <sstream>
#include <vector>

#include "doctest.h"
#include "lqg/closed_loop.hpp"
#include "oracles.hpp"

using namespace lqg;

namespace {

StateSpaceModel benchmark_design(double sigma_sq) {
    return StateSpaceModel{Matrix{{1.0, 1.0}, {0.0, 1.0}},
                           Matrix{{0.0}, {1.0}},
                           Matrix::identity(2),
                           Matrix::diagonal(2, sigma_sq),
                           Matrix::diagonal(2, sigma_sq)};
}

const Matrix kX0{{10.0}, {0.0}};

}  // namespace

TEST_CASE("zero-horizon rollout") {
    const StateSpaceModel model = benchmark_design(1.0);
    const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 0);
    const Controller mb = make_model_based_controller(model, cost, kX0);
    Simulator sim(model, 3, kX0);
    const Trajectory traj = rollout(mb, sim, cost);
    CHECK(traj.horizon() == 0);
    CHECK(traj.states.size() == 1);
    CHECK(lqg_loss(traj, cost) == doctest::Approx(100.0));  // terminal term only
}

TEST_CASE("noiseless matched loop: zero-gain learned variant equals model-based") {
    // noiseless limit; exact zero V makes S singular after the first update,
    // which the filter correctly reports as a singularity error
    const StateSpaceModel model = benchmark_design(1e-30);
    const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 40);
    const Controller mb = make_model_based_controller(model, cost, kX0);
    const Controller learned = make_learned_controller(model, cost, kX0,
                                                       zero_params(GainNetArch{2, 2, 8, 8}));
    Simulator sim_a(model, 5, kX0);
    Simulator sim_b(model, 5, kX0);
    const Trajectory ta = rollout(mb, sim_a, cost);
    const Trajectory tb = rollout(learned, sim_b, cost);
    for (int t = 0; t < cost.horizon; ++t) {
        CHECK(max_abs_diff(ta.controls[t], tb.controls[t]) < 1e-12);
    }
}

TEST_CASE("rollout dynamics agree with an independently stepped simulator") {
    const StateSpaceModel model = benchmark_design(1.0);
    const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 25);
    const Controller mb = make_model_based_controller(model, cost, kX0);
    Simulator sim(model, 11, kX0);
    const Trajectory traj = rollout(mb, sim, cost);

    Simulator replayed(model, 11, kX0);
    for (int t = 0; t < cost.horizon; ++t) {
        auto [x, y] = replayed.step(traj.controls[t]);
        for (int i = 0; i < x.size(); ++i) CHECK(x[i] == traj.states[t + 1][i]);
        for (int i = 0; i < y.size(); ++i) CHECK(y[i] == traj.observations[t][i]);
    }
}

TEST_CASE("model-based mean loss matches the analytic optimum within 3%") {
    const StateSpaceModel model = benchmark_design(1.0);  // matched, 0 dB
    const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 100);
    const Controller mb = make_model_based_controller(model, cost, kX0);
    const int seeds = 1000;
    double mean = 0.0;
    for (int k = 0; k < seeds; ++k) {
        Simulator sim(model, CounterRng::derive(2024, k), kX0);
        mean += lqg_loss(rollout(mb, sim, cost), cost);
    }
    mean /= seeds;
    const double expect = oracles::analytic_lqg_cost(model, cost, kX0);
    CHECK(mean == doctest::Approx(expect).epsilon(0.03));
}

TEST_CASE("lqg_loss") {
    SUBCASE("all-zero trajectory") {
        Trajectory traj;
        traj.prior_mean = Matrix(2, 1);
        traj.states = {Matrix(2, 1), Matrix(2, 1)};
        traj.controls = {Matrix(1, 1)};
        const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 1);
        CHECK(lqg_loss(traj, cost) == 0.0);
    }
    SUBCASE("hand-computed one-step cost") {
        Trajectory traj;
        traj.prior_mean = Matrix(2, 1);
        traj.states = {Matrix{{1.0}, {0.0}}, Matrix(2, 1)};
        traj.controls = {Matrix{{2.0}}};
        const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 1);
        CHECK(lqg_loss(traj, cost) == doctest::Approx(5.0));
    }
    SUBCASE("homogeneity in the weights") {
        const StateSpaceModel model = benchmark_design(1.0);
        QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 30);
        const Controller mb = make_model_based_controller(model, cost, kX0);
        Simulator sim(model, 8, kX0);
        const Trajectory traj = rollout(mb, sim, cost);
        const double base = lqg_loss(traj, cost);
        QuadraticCost scaled = cost;
        scaled.q_state = 3.0 * cost.q_state;
        scaled.q_final = 3.0 * cost.q_final;
        scaled.r_control = 3.0 * cost.r_control;
        CHECK(lqg_loss(traj, scaled) == doctest::Approx(3.0 * base).epsilon(1e-12));
    }
    SUBCASE("non-negative on random rollouts") {
        const StateSpaceModel model = benchmark_design(1.0);
        const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 20);
        const Controller mb = make_model_based_controller(model, cost, kX0);
        for (int k = 0; k < 20; ++k) {
            Simulator sim(model, CounterRng::derive(55, k), kX0);
            CHECK(lqg_loss(rollout(mb, sim, cost), cost) >= 0.0);
        }
    }
}

TEST_CASE("state_mse") {
    SUBCASE("perfect estimates") {
        Trajectory traj;
        traj.prior_mean = Matrix(2, 1);
        traj.states = {Matrix(2, 1), Matrix{{1.0}, {2.0}}};
        traj.controls = {Matrix(1, 1)};
        traj.estimates = {Matrix{{1.0}, {2.0}}};
        CHECK(state_mse(traj) == 0.0);
    }
    SUBCASE("single step") {
        Trajectory traj;
        traj.prior_mean = Matrix(2, 1);
        traj.states = {Matrix(2, 1), Matrix{{1.0}, {0.0}}};
        traj.controls = {Matrix(1, 1)};
        traj.estimates = {Matrix(2, 1)};
        CHECK(state_mse(traj) == doctest::Approx(1.0));
    }
}

TEST_CASE("to_db") {
    CHECK(to_db(1.0) == 0.0);
    CHECK(to_db(10.0) == doctest::Approx(10.0));
    CHECK(to_db(0.5) == doctest::Approx(-3.0103).epsilon(1e-4));
    CHECK_THROWS_AS(to_db(0.0), std::domain_error);
    CHECK_THROWS_AS(to_db(-2.0), std::domain_error);
}

TEST_CASE("forcing the filter gains reproduces the model-based rollout bit-identically") {
    const StateSpaceModel model = benchmark_design(1.0);
    const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 50);
    const Controller mb = make_model_based_controller(model, cost, kX0);
    Simulator sim_a(model, 13, kX0);
    const Trajectory reference = rollout(mb, sim_a, cost);

    const Controller learned = make_learned_controller(model, cost, kX0,
                                                       zero_params(GainNetArch{2, 2, 8, 8}));
    RolloutOptions options;
    options.forced_gains = &reference.gains;
    Simulator sim_b(model, 13, kX0);
    const Trajectory forced = rollout(learned, sim_b, cost, options);

    for (int t = 0; t < cost.horizon; ++t) {
        for (int i = 0; i < 2; ++i) {
            CHECK(forced.states[t + 1][i] == reference.states[t + 1][i]);
            CHECK(forced.estimates[t][i] == reference.estimates[t][i]);
        }
        CHECK(forced.controls[t][0] == reference.controls[t][0]);
    }
}

TEST_CASE("traced rollout reproduces the plain learned rollout bit-identically") {
    const StateSpaceModel model = benchmark_design(1.0);
    const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 30);
    const GainNetArch arch{2, 2, 8, 8};
    const GainNetParams params = init_params(arch, 44);
    const Controller learned = make_learned_controller(model, cost, kX0, params);

    Simulator sim_plain(model, 21, kX0);
    const Trajectory plain = rollout(learned, sim_plain, cost);

    Tape tape;
    GainNetParamNodes nodes = lift_params(tape, params);
    Simulator sim_traced(model, 21, kX0);
    const TracedTrajectory traced = rollout_traced(model, learned.schedule, learned.prior,
                                                   arch, nodes, sim_traced, cost, tape);
    const Trajectory lowered = to_plain(traced);

    REQUIRE(lowered.states.size() == plain.states.size());
    for (size_t t = 0; t < plain.states.size(); ++t) {
        for (int i = 0; i < 2; ++i) CHECK(lowered.states[t][i] == plain.states[t][i]);
    }
    for (int t = 0; t < cost.horizon; ++t) {
        CHECK(lowered.controls[t][0] == plain.controls[t][0]);
        for (int i = 0; i < 4; ++i) CHECK(lowered.gains[t][i] == plain.gains[t][i]);
    }
    CHECK(scalar_value(lqg_loss(traced, cost)) ==
          doctest::Approx(lqg_loss(plain, cost)).epsilon(1e-15));
}

TEST_CASE("matched closed loop stays bounded") {
    const StateSpaceModel model = benchmark_design(1.0);
    const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 100);
    const Controller mb = make_model_based_controller(model, cost, kX0);
    double worst = 0.0;
    for (int k = 0; k < 1000; ++k) {
        Simulator sim(model, CounterRng::derive(3000, k), kX0);
        const Trajectory traj = rollout(mb, sim, cost);
        for (const Matrix& x : traj.states) worst = std::max(worst, max_abs(x));
    }
    CHECK(worst < 100.0);
}

TEST_CASE("trajectory CSV schema") {
    const StateSpaceModel model = benchmark_design(1.0);
    const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 7);
    const Controller mb = make_model_based_controller(model, cost, kX0);
    Simulator sim(model, 2, kX0);
    const Trajectory traj = rollout(mb, sim, cost);

    std::ostringstream out;
    write_trajectory_csv(out, traj);
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "t,x_1,x_2,y_1,y_2,u_1,xhat_1,xhat_2");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == cost.horizon + 1);
}
