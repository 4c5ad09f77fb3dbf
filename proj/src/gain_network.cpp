#include "lqg/gain_network.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "lqg/rng.hpp"

namespace lqg {

namespace {

struct WeightSpec {
    int rows;
    int cols;
    int fan_in;
};

// Canonical order; flatten, lift_params and checkpoints all follow it.
std::vector<WeightSpec> weight_specs(const GainNetArch& a) {
    const int f = a.feature_dim(), h1 = a.embed_dim, h2 = a.hidden_dim;
    const int mn = a.state_dim * a.obs_dim;
    return {
        {h1, f, f},  {h1, 1, f},                              // embedding
        {h2, h1, h1}, {h2, h2, h2}, {h2, 1, h1},              // update gate
        {h2, h1, h1}, {h2, h2, h2}, {h2, 1, h1},              // reset gate
        {h2, h1, h1}, {h2, h2, h2}, {h2, 1, h1},              // candidate
        {mn, h2, h2}, {mn, 1, h2},                            // output head
    };
}

template <class V, class Fn>
void for_each_weight(GainNetWeightsT<V>& w, Fn&& fn) {
    fn(w.w_in); fn(w.b_in);
    fn(w.w_update); fn(w.u_update); fn(w.b_update);
    fn(w.w_reset); fn(w.u_reset); fn(w.b_reset);
    fn(w.w_cand); fn(w.u_cand); fn(w.b_cand);
    fn(w.w_out); fn(w.b_out);
}

template <class V, class Fn>
void for_each_weight(const GainNetWeightsT<V>& w, Fn&& fn) {
    fn(w.w_in); fn(w.b_in);
    fn(w.w_update); fn(w.u_update); fn(w.b_update);
    fn(w.w_reset); fn(w.u_reset); fn(w.b_reset);
    fn(w.w_cand); fn(w.u_cand); fn(w.b_cand);
    fn(w.w_out); fn(w.b_out);
}

std::string format_full(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

}  // namespace

int GainNetArch::param_count() const {
    int count = 0;
    for (const auto& s : weight_specs(*this)) count += s.rows * s.cols;
    return count;
}

std::vector<double> GainNetParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(arch.param_count());
    for_each_weight(w, [&](const Matrix& m) {
        flat.insert(flat.end(), m.data().begin(), m.data().end());
    });
    return flat;
}

GainNetParams GainNetParams::unflatten(const GainNetArch& arch, std::span<const double> flat) {
    if (static_cast<int>(flat.size()) != arch.param_count()) {
        throw DimensionError("GainNetParams::unflatten: expected " +
                             std::to_string(arch.param_count()) + " values, got " +
                             std::to_string(flat.size()));
    }
    GainNetParams params;
    params.arch = arch;
    size_t offset = 0;
    auto specs = weight_specs(arch);
    size_t i = 0;
    for_each_weight(params.w, [&](Matrix& m) {
        const auto& s = specs[i++];
        const size_t count = static_cast<size_t>(s.rows) * s.cols;
        m = Matrix(s.rows, s.cols,
                   std::vector<double>(flat.begin() + offset, flat.begin() + offset + count));
        offset += count;
    });
    return params;
}

double GainNetParams::squared_norm() const {
    double s = 0.0;
    for_each_weight(w, [&](const Matrix& m) { s += scalar_value(sum_squares(m)); });
    return s;
}

GainNetParams init_params(const GainNetArch& arch, uint64_t seed) {
    CounterRng rng(seed);
    GainNetParams params;
    params.arch = arch;
    auto specs = weight_specs(arch);
    size_t i = 0;
    for_each_weight(params.w, [&](Matrix& m) {
        const auto& s = specs[i++];
        const double bound = 1.0 / std::sqrt(static_cast<double>(s.fan_in));
        m = Matrix(s.rows, s.cols);
        for (int k = 0; k < m.size(); ++k) m[k] = bound * (2.0 * rng.next_uniform() - 1.0);
    });
    return params;
}

GainNetParams zero_params(const GainNetArch& arch) {
    GainNetParams params;
    params.arch = arch;
    auto specs = weight_specs(arch);
    size_t i = 0;
    for_each_weight(params.w, [&](Matrix& m) {
        const auto& s = specs[i++];
        m = Matrix(s.rows, s.cols);
    });
    return params;
}

GainNetParamNodes lift_params(Tape& tape, const GainNetParams& params) {
    std::vector<const Matrix*> mats;
    for_each_weight(params.w, [&](const Matrix& m) { mats.push_back(&m); });
    GainNetParamNodes nodes;
    nodes.leaf_ids.reserve(mats.size());
    size_t k = 0;
    for_each_weight(nodes.w, [&](Node& n) {
        n = tape.leaf(*mats[k++]);
        nodes.leaf_ids.push_back(n.id());
    });
    return nodes;
}

std::vector<double> flatten_gradient(const GradientMap& grads, const GainNetParamNodes& nodes) {
    std::vector<double> flat;
    for (int id : nodes.leaf_ids) {
        const Matrix& g = grads.at(id);
        flat.insert(flat.end(), g.data().begin(), g.data().end());
    }
    return flat;
}

void save_checkpoint(const std::string& path, const GainNetParams& params, uint64_t seed) {
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("save_checkpoint: cannot open " + path);
    }
    out << "lqg-gain-checkpoint 1\n";
    out << "state_dim " << params.arch.state_dim << "\n";
    out << "obs_dim " << params.arch.obs_dim << "\n";
    out << "embed_dim " << params.arch.embed_dim << "\n";
    out << "hidden_dim " << params.arch.hidden_dim << "\n";
    out << "seed " << seed << "\n";
    const auto flat = params.flatten();
    out << "param_count " << flat.size() << "\n";
    for (double v : flat) out << format_full(v) << "\n";
    if (!out) {
        throw std::runtime_error("save_checkpoint: write failed for " + path);
    }
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("load_checkpoint: cannot open " + path);
    }
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "lqg-gain-checkpoint" || version != 1) {
        throw std::runtime_error("load_checkpoint: " + path + " is not a v1 checkpoint");
    }
    auto read_field = [&](const std::string& name) -> long long {
        std::string key;
        long long value = 0;
        in >> key >> value;
        if (key != name || !in) {
            throw std::runtime_error("load_checkpoint: expected field '" + name + "' in " + path);
        }
        return value;
    };
    GainNetArch arch;
    arch.state_dim = static_cast<int>(read_field("state_dim"));
    arch.obs_dim = static_cast<int>(read_field("obs_dim"));
    arch.embed_dim = static_cast<int>(read_field("embed_dim"));
    arch.hidden_dim = static_cast<int>(read_field("hidden_dim"));
    const uint64_t seed = static_cast<uint64_t>(read_field("seed"));
    const long long count = read_field("param_count");
    if (count != arch.param_count()) {
        throw std::runtime_error("load_checkpoint: parameter count " + std::to_string(count) +
                                 " does not match architecture (" +
                                 std::to_string(arch.param_count()) + ")");
    }
    std::vector<double> flat(static_cast<size_t>(count));
    for (auto& v : flat) {
        std::string token;
        in >> token;
        auto res = std::from_chars(token.data(), token.data() + token.size(), v);
        if (!in || res.ec != std::errc()) {
            throw std::runtime_error("load_checkpoint: malformed value in " + path);
        }
    }
    return Checkpoint{GainNetParams::unflatten(arch, flat), seed};
}

}  // namespace lqg
