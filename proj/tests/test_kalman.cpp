#include <vector>

#include "doctest.h"
#include "lqg/closed_loop.hpp"
#include "lqg/kalman.hpp"
#include "oracles.hpp"

using namespace lqg;

namespace {

StateSpaceModel scalar_model(double f, double h, double w, double v) {
    return StateSpaceModel{Matrix{{f}}, Matrix{{0.0}}, Matrix{{h}}, Matrix{{w}}, Matrix{{v}}};
}

StateSpaceModel benchmark_design(double sigma_sq) {
    return StateSpaceModel{Matrix{{1.0, 1.0}, {0.0, 1.0}},
                           Matrix{{0.0}, {1.0}},
                           Matrix::identity(2),
                           Matrix::diagonal(2, sigma_sq),
                           Matrix::diagonal(2, sigma_sq)};
}

}  // namespace

TEST_CASE("kf_predict") {
    SUBCASE("scalar covariance doubles") {
        const StateSpaceModel m = scalar_model(1.0, 1.0, 1.0, 1.0);
        const Belief prev{Matrix{{0.0}}, Matrix{{1.0}}};
        const Prediction p = kf_predict(m, prev, Matrix(1, 1));
        CHECK(scalar_value(p.belief.covariance) == doctest::Approx(2.0));
    }
    SUBCASE("noiseless mean is a fixed point") {
        StateSpaceModel m = benchmark_design(0.0);
        const Belief prev{Matrix{{10.0}, {0.0}}, Matrix(2, 2)};
        const Prediction p = kf_predict(m, prev, Matrix(1, 1));
        CHECK(max_abs_diff(p.belief.mean, Matrix{{10.0}, {0.0}}) == 0.0);
        CHECK(max_abs_diff(p.predicted_observation, Matrix{{10.0}, {0.0}}) == 0.0);
    }
    SUBCASE("covariance propagation by hand") {
        StateSpaceModel m = benchmark_design(1.0);
        const Belief prev{Matrix(2, 1), Matrix::identity(2)};
        const Prediction p = kf_predict(m, prev, Matrix(1, 1));
        CHECK(max_abs_diff(p.belief.covariance, Matrix{{3.0, 1.0}, {1.0, 2.0}}) < 1e-15);
    }
}

TEST_CASE("kf_update") {
    SUBCASE("perfect-observation limit pulls the mean to y") {
        StateSpaceModel m = benchmark_design(1.0);
        m.V = Matrix::diagonal(2, 1e-12);
        const Belief predicted{Matrix{{1.0}, {1.0}}, Matrix::identity(2)};
        const Matrix y{{4.0}, {-2.0}};
        auto [posterior, report] = kf_update(m, predicted, predicted.mean, y);
        CHECK(max_abs_diff(report.gain, Matrix::identity(2)) < 1e-10);
        CHECK(max_abs_diff(posterior.mean, y) < 1e-10);
    }
    SUBCASE("scalar closed form") {
        const StateSpaceModel m = scalar_model(1.0, 1.0, 1.0, 1.0);
        const Belief predicted{Matrix{{0.0}}, Matrix{{2.0}}};
        auto [posterior, report] = kf_update(m, predicted, Matrix{{0.0}}, Matrix{{1.0}});
        CHECK(scalar_value(report.innovation_covariance) == doctest::Approx(3.0));
        CHECK(scalar_value(report.gain) == doctest::Approx(2.0 / 3.0));
        CHECK(scalar_value(posterior.covariance) == doctest::Approx(2.0 / 3.0));
        CHECK(scalar_value(posterior.mean) == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("zero innovation keeps the prediction") {
        StateSpaceModel m = benchmark_design(1.0);
        const Belief predicted{Matrix{{3.0}, {-1.0}}, Matrix::identity(2)};
        const Matrix y = predicted.mean;  // H = I
        auto [posterior, report] = kf_update(m, predicted, predicted.mean, y);
        CHECK(max_abs(report.innovation) == 0.0);
        CHECK(max_abs_diff(posterior.mean, predicted.mean) == 0.0);
    }
    SUBCASE("degenerate innovation covariance is a singularity error") {
        StateSpaceModel m = scalar_model(1.0, 1.0, 0.0, 0.0);
        const Belief predicted{Matrix{{0.0}}, Matrix{{0.0}}};
        CHECK_THROWS_AS(kf_update(m, predicted, Matrix{{0.0}}, Matrix{{1.0}}),
                        SingularMatrixError);
    }
}

TEST_CASE("filter_trajectory") {
    SUBCASE("zero horizon") {
        const StateSpaceModel m = benchmark_design(1.0);
        const FilterResult r = filter_trajectory(m, default_prior(Matrix(2, 1)), {}, {});
        CHECK(r.beliefs.empty());
        CHECK(r.reports.empty());
    }
    SUBCASE("length mismatch") {
        const StateSpaceModel m = benchmark_design(1.0);
        std::vector<Matrix> controls(2, Matrix(1, 1));
        std::vector<Matrix> obs(1, Matrix(2, 1));
        CHECK_THROWS_AS(filter_trajectory(m, default_prior(Matrix(2, 1)), controls, obs),
                        DimensionError);
    }
    SUBCASE("scalar covariance reaches the fixed point") {
        const StateSpaceModel m = scalar_model(0.9, 1.0, 0.6, 1.3);
        const int T = 300;
        std::vector<Matrix> controls(T, Matrix(1, 1));
        std::vector<Matrix> obs(T, Matrix{{0.5}});
        const FilterResult r = filter_trajectory(m, default_prior(Matrix(1, 1)), controls, obs);
        const double expect = oracles::scalar_filter_fixed_point(0.9, 1.0, 0.6, 1.3);
        CHECK(scalar_value(r.beliefs.back().covariance) ==
              doctest::Approx(expect).epsilon(1e-9));
    }
}

TEST_CASE("matched filter consistency over Monte-Carlo rollouts") {
    const StateSpaceModel model = benchmark_design(1.0);  // 0 dB
    const Matrix x0{{10.0}, {0.0}};
    const QuadraticCost cost = QuadraticCost::identity_weights(2, 1, 100);
    const Controller mb = make_model_based_controller(model, cost, x0);

    const int trajectories = 500;
    double empirical = 0.0;
    double lag_num0 = 0.0, lag_num1 = 0.0, lag_den0 = 0.0, lag_den1 = 0.0;
    double sigma_trace = 0.0;
    bool traced_once = false;

    for (int k = 0; k < trajectories; ++k) {
        Simulator sim(model, CounterRng::derive(1001, k), x0);
        const Trajectory traj = rollout(mb, sim, cost);
        empirical += state_mse(traj);

        const FilterResult fr = filter_trajectory(model, mb.prior, traj.controls,
                                                  traj.observations);
        if (!traced_once) {
            traced_once = true;
            for (const Belief& b : fr.beliefs) {
                sigma_trace += scalar_value(trace(b.covariance));
            }
            sigma_trace /= static_cast<double>(fr.beliefs.size());
        }
        for (size_t t = 0; t + 1 < fr.reports.size(); ++t) {
            const Matrix& d0 = fr.reports[t].innovation;
            const Matrix& d1 = fr.reports[t + 1].innovation;
            lag_num0 += d0(0, 0) * d1(0, 0);
            lag_num1 += d0(1, 0) * d1(1, 0);
        }
        for (const UpdateReport& rep : fr.reports) {
            lag_den0 += rep.innovation(0, 0) * rep.innovation(0, 0);
            lag_den1 += rep.innovation(1, 0) * rep.innovation(1, 0);
        }
    }
    empirical /= trajectories;
    CHECK(empirical == doctest::Approx(sigma_trace).epsilon(0.05));
    CHECK(std::abs(lag_num0 / lag_den0) < 0.05);
    CHECK(std::abs(lag_num1 / lag_den1) < 0.05);
}

TEST_CASE("update never increases covariance") {
    CounterRng rng(31);
    const StateSpaceModel m = benchmark_design(1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const Matrix pred_cov = oracles::make_spd({0.5 + rng.next_uniform(),
                                                   0.5 + 2.0 * rng.next_uniform()}, rng);
        const GainStep g = kf_gain(m, pred_cov);
        const Matrix diff = pred_cov - g.posterior_covariance;
        CHECK(oracles::min_eig_sym2(diff) > -1e-10);
        CHECK(oracles::min_eig_sym2(g.posterior_covariance) > -1e-10);
    }
}

TEST_CASE("covariance update equals the Joseph stabilized form") {
    CounterRng rng(37);
    for (int trial = 0; trial < 30; ++trial) {
        StateSpaceModel m = benchmark_design(0.4 + rng.next_uniform());
        m.V = oracles::make_spd({0.3 + rng.next_uniform(), 0.3 + rng.next_uniform()}, rng);
        const Matrix pred_cov =
            oracles::make_spd({0.5 + rng.next_uniform(), 0.5 + 2.0 * rng.next_uniform()}, rng);
        const GainStep g = kf_gain(m, pred_cov);
        const Matrix i_kh = Matrix::identity(2) - g.gain * m.H;
        const Matrix joseph =
            i_kh * pred_cov * transpose(i_kh) + g.gain * m.V * transpose(g.gain);
        CHECK(max_abs_diff(g.posterior_covariance, joseph) < 1e-8);
    }
}
