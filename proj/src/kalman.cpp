#include "lqg/kalman.hpp"

#include <string>

namespace lqg {

Belief default_prior(const Matrix& x0_mean, double epsilon) {
    return Belief{x0_mean, Matrix::diagonal(x0_mean.rows(), epsilon)};
}

Matrix kf_predict_cov(const StateSpaceModel& model, const Matrix& covariance) {
    return symmetrize(
        add(matmul(matmul(model.F, covariance), transpose(model.F)), model.W));
}

Prediction kf_predict(const StateSpaceModel& model, const Belief& prev, const Matrix& u) {
    Prediction p;
    p.belief.mean = add(matmul(model.F, prev.mean), matmul(model.G, u));
    p.belief.covariance = kf_predict_cov(model, prev.covariance);
    p.predicted_observation = matmul(model.H, p.belief.mean);
    return p;
}

GainStep kf_gain(const StateSpaceModel& model, const Matrix& predicted_covariance) {
    GainStep g;
    g.innovation_covariance = symmetrize(
        add(matmul(matmul(model.H, predicted_covariance), transpose(model.H)), model.V));
    // K = cov H^T S^{-1} = (S^{-1} H cov)^T, using cov symmetry
    g.gain = transpose(
        solve_spd(g.innovation_covariance, matmul(model.H, predicted_covariance)));
    g.posterior_covariance = symmetrize(
        sub(predicted_covariance,
            matmul(matmul(g.gain, g.innovation_covariance), transpose(g.gain))));
    return g;
}

std::pair<Belief, UpdateReport> kf_update(const StateSpaceModel& model,
                                          const Belief& predicted,
                                          const Matrix& predicted_observation,
                                          const Matrix& observation) {
    GainStep g = kf_gain(model, predicted.covariance);
    UpdateReport report;
    report.innovation = sub(observation, predicted_observation);
    report.innovation_covariance = g.innovation_covariance;
    report.gain = g.gain;

    Belief posterior;
    posterior.mean = add(predicted.mean, matmul(g.gain, report.innovation));
    posterior.covariance = g.posterior_covariance;
    return {std::move(posterior), std::move(report)};
}

FilterResult filter_trajectory(const StateSpaceModel& model, const Belief& prior,
                               std::span<const Matrix> controls,
                               std::span<const Matrix> observations) {
    if (controls.size() != observations.size()) {
        throw DimensionError("filter_trajectory: " + std::to_string(controls.size()) +
                             " controls vs " + std::to_string(observations.size()) +
                             " observations");
    }
    FilterResult result;
    result.beliefs.reserve(controls.size());
    result.reports.reserve(controls.size());
    Belief belief = prior;
    for (size_t t = 0; t < controls.size(); ++t) {
        Prediction p = kf_predict(model, belief, controls[t]);
        auto [posterior, report] =
            kf_update(model, p.belief, p.predicted_observation, observations[t]);
        belief = posterior;
        result.beliefs.push_back(std::move(posterior));
        result.reports.push_back(std::move(report));
    }
    return result;
}

}  // namespace lqg
