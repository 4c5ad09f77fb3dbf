#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lqg/domain.hpp"
#include "lqg/matrix.hpp"
#include "lqg/tape.hpp"

namespace lqg {

// Recurrent network that emits a surrogate Kalman gain each step. One
// embedding layer with a rectifier, one gated recurrent cell, and a linear
// output head reshaped to m x n (no output nonlinearity: gains carry sign).
struct GainNetArch {
    int state_dim = 2;
    int obs_dim = 2;
    int embed_dim = 40;
    int hidden_dim = 40;

    // innovation (n) + observation difference (n) + forward update difference (m)
    int feature_dim() const { return 2 * obs_dim + state_dim; }
    int param_count() const;

    bool operator==(const GainNetArch&) const = default;
};

template <class V>
struct GainNetWeightsT {
    V w_in, b_in;                      // embedding
    V w_update, u_update, b_update;    // update gate
    V w_reset, u_reset, b_reset;       // reset gate
    V w_cand, u_cand, b_cand;          // candidate state
    V w_out, b_out;                    // output head
};

struct GainNetParams {
    GainNetArch arch;
    GainNetWeightsT<Matrix> w;

    std::vector<double> flatten() const;
    static GainNetParams unflatten(const GainNetArch& arch, std::span<const double> flat);
    double squared_norm() const;
};

// Fan-in scaled uniform initialization, deterministic per seed.
GainNetParams init_params(const GainNetArch& arch, uint64_t seed);
GainNetParams zero_params(const GainNetArch& arch);

// Tape mirror of the parameters, leaves in canonical (flatten) order.
struct GainNetParamNodes {
    GainNetWeightsT<Node> w;
    std::vector<int> leaf_ids;
};
GainNetParamNodes lift_params(Tape& tape, const GainNetParams& params);

// Gradient map -> flat vector aligned with GainNetParams::flatten().
std::vector<double> flatten_gradient(const GradientMap& grads, const GainNetParamNodes& nodes);

// Per-trajectory recurrent state; zero at trajectory start.
template <class V>
struct GainNetStateT {
    V hidden;            // hidden_dim x 1
    V prev_posterior;    // m x 1
    V prev_prior;        // m x 1
    V prev_observation;  // n x 1
    V feature_ssq;       // feature_dim x 1, running sum of squared raw features
    int step = 0;
};
using GainNetState = GainNetStateT<Matrix>;

template <class D, class V = typename D::Value>
GainNetStateT<V> initial_gain_state(const D& dom, const GainNetArch& arch) {
    GainNetStateT<V> s;
    s.hidden = dom.constant(Matrix(arch.hidden_dim, 1));
    s.prev_posterior = dom.constant(Matrix(arch.state_dim, 1));
    s.prev_prior = dom.constant(Matrix(arch.state_dim, 1));
    s.prev_observation = dom.constant(Matrix(arch.obs_dim, 1));
    s.feature_ssq = dom.constant(Matrix(arch.feature_dim(), 1));
    s.step = 0;
    return s;
}

inline constexpr double kFeatureRmsFloor = 1e-8;

// Step features: innovation, observation difference, and forward update
// difference, each dimension normalized by its running root-mean-square.
// Advances the normalizer state; the caller advances the prev_* context
// after the belief update (see advance_gain_context).
template <class D, class V = typename D::Value>
V build_features(const D& dom, GainNetStateT<V>& state, const V& observation,
                 const V& predicted_observation) {
    (void)dom;
    const V innovation = sub(observation, predicted_observation);
    const V obs_diff = sub(observation, state.prev_observation);
    const V update_diff = sub(state.prev_posterior, state.prev_prior);
    const V raw = concat_rows(concat_rows(innovation, obs_diff), update_diff);

    state.step += 1;
    state.feature_ssq = add(state.feature_ssq, hadamard(raw, raw));
    const V norm = rms_floor(state.feature_ssq, 1.0 / state.step, kFeatureRmsFloor);
    return elem_div(raw, norm);
}

template <class V>
void advance_gain_context(GainNetStateT<V>& state, const V& observation,
                          const V& predicted_mean, const V& posterior_mean) {
    state.prev_observation = observation;
    state.prev_prior = predicted_mean;
    state.prev_posterior = posterior_mean;
}

// One recurrent step: features -> embedding -> gated cell -> gain matrix.
template <class D, class V = typename D::Value>
V gain_step(const D& dom, const GainNetWeightsT<V>& w, const GainNetArch& arch,
            GainNetStateT<V>& state, const V& features) {
    const V embed = relu(add(matmul(w.w_in, features), w.b_in));
    const V& h = state.hidden;
    const V z = sigmoid(add(add(matmul(w.w_update, embed), matmul(w.u_update, h)), w.b_update));
    const V r = sigmoid(add(add(matmul(w.w_reset, embed), matmul(w.u_reset, h)), w.b_reset));
    const V cand = tanh(
        add(add(matmul(w.w_cand, embed), matmul(w.u_cand, hadamard(r, h))), w.b_cand));
    const V ones = dom.constant(Matrix(arch.hidden_dim, 1,
                                       std::vector<double>(arch.hidden_dim, 1.0)));
    state.hidden = add(hadamard(sub(ones, z), h), hadamard(z, cand));
    return reshape(add(matmul(w.w_out, state.hidden), w.b_out), arch.state_dim, arch.obs_dim);
}

// Checkpoint file: plain text, architecture + seed + flattened weights.
// Layout is documented in the README and stable across versions.
void save_checkpoint(const std::string& path, const GainNetParams& params, uint64_t seed);

struct Checkpoint {
    GainNetParams params;
    uint64_t seed = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace lqg
