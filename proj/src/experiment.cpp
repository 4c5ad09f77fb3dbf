#include "lqg/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "lqg/rng.hpp"

namespace lqg {

namespace {

std::string format_double(double v) {
    char buf[40];
    auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 12);
    return std::string(buf, res.ptr);
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_tokens(const std::string& s) {
    std::vector<std::string> tokens;
    std::istringstream stream(s);
    std::string token;
    while (stream >> token) tokens.push_back(token);
    return tokens;
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& message) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": " + message);
}

double parse_double(const std::string& origin, int line, const std::string& key,
                    const std::string& value) {
    double out = 0.0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc() || res.ptr != end) {
        fail(origin, line, "key '" + key + "': cannot parse '" + value + "' as a number");
    }
    return out;
}

long long parse_int(const std::string& origin, int line, const std::string& key,
                    const std::string& value) {
    long long out = 0;
    const char* begin = value.data();
    const char* end = begin + value.size();
    auto res = std::from_chars(begin, end, out);
    if (res.ec != std::errc() || res.ptr != end) {
        fail(origin, line, "key '" + key + "': cannot parse '" + value + "' as an integer");
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& origin, int line,
                                      const std::string& key, const std::string& value) {
    std::vector<double> out;
    for (const std::string& token : split_tokens(value)) {
        out.push_back(parse_double(origin, line, key, token));
    }
    return out;
}

// Matrix syntax: rows separated by ';', entries by whitespace,
// e.g. "1 1; 0 1".
Matrix parse_matrix(const std::string& origin, int line, const std::string& key,
                    const std::string& value) {
    std::vector<std::vector<double>> rows;
    std::string row_text;
    std::istringstream stream(value);
    while (std::getline(stream, row_text, ';')) {
        auto row = parse_double_list(origin, line, key, row_text);
        if (row.empty()) fail(origin, line, "key '" + key + "': empty matrix row");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) fail(origin, line, "key '" + key + "': empty matrix");
    const size_t cols = rows.front().size();
    std::vector<double> flat;
    for (const auto& row : rows) {
        if (row.size() != cols) {
            fail(origin, line, "key '" + key + "': ragged matrix rows");
        }
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return Matrix(static_cast<int>(rows.size()), static_cast<int>(cols), std::move(flat));
}

Matrix parse_vector(const std::string& origin, int line, const std::string& key,
                    const std::string& value) {
    auto entries = parse_double_list(origin, line, key, value);
    if (entries.empty()) fail(origin, line, "key '" + key + "': empty vector");
    return Matrix::column(std::move(entries));
}

const std::vector<std::string> kKnownSettings = {"matched", "mismatch-f", "mismatch-h"};

uint64_t cell_tag(size_t setting_index, size_t noise_index) {
    return 1 + setting_index * 1000 + noise_index;
}

}  // namespace

ExperimentConfig ExperimentConfig::defaults() {
    ExperimentConfig cfg;
    cfg.design_f = Matrix{{1.0, 1.0}, {0.0, 1.0}};
    cfg.design_g = Matrix{{0.0}, {1.0}};
    cfg.design_h = Matrix::identity(2);
    cfg.mismatch = MismatchSpec{MismatchTarget::none, 20.0};
    cfg.settings = kKnownSettings;
    cfg.noise_sweep_db = {-10.0, -5.0, 0.0, 5.0, 10.0};
    cfg.cost = QuadraticCost::identity_weights(2, 1, 100);
    cfg.x0 = Matrix{{10.0}, {0.0}};
    cfg.train_sigma0 = 1.0;
    cfg.arch = GainNetArch{2, 2, 40, 40};
    cfg.train = TrainConfig{};
    cfg.test_seeds = 1000;
    cfg.seed = 0;
    cfg.out_dir = "out";
    return cfg;
}

StateSpaceModel ExperimentConfig::design_model(const NoiseSpec& noise) const {
    auto [w, v] = noise_covariances(noise, design_f.rows(), design_h.rows());
    return StateSpaceModel{design_f, design_g, design_h, std::move(w), std::move(v)};
}

void ExperimentConfig::validate() const {
    try {
        StateSpaceModel model = design_model(NoiseSpec{});
        model.validate();
        const int m = model.state_dim(), q = model.control_dim();
        if (cost.q_state.rows() != m || cost.q_state.cols() != m ||
            cost.q_final.rows() != m || cost.q_final.cols() != m) {
            throw ConfigError("cost state weights must be " + std::to_string(m) + "x" +
                              std::to_string(m));
        }
        if (cost.r_control.rows() != q || cost.r_control.cols() != q) {
            throw ConfigError("cost.r_control must be " + std::to_string(q) + "x" +
                              std::to_string(q));
        }
        if (cost.state_target.rows() != m || cost.control_target.rows() != q) {
            throw ConfigError("cost targets do not match design dimensions");
        }
        if (x0.rows() != m || x0.cols() != 1) {
            throw ConfigError("init.x0 must be a state-dimension column vector");
        }
        if (cost.horizon < 0) throw ConfigError("horizon must be >= 0");
        if (test_seeds < 1) throw ConfigError("test.seeds must be >= 1");
        for (const std::string& s : settings) {
            if (std::find(kKnownSettings.begin(), kKnownSettings.end(), s) ==
                kKnownSettings.end()) {
                throw ConfigError("unknown setting '" + s + "'");
            }
        }
    } catch (const DimensionError& e) {
        throw ConfigError(e.what());
    }
}

MismatchSpec mismatch_for_setting(const std::string& setting, double alpha_degrees) {
    if (setting == "matched") return MismatchSpec{MismatchTarget::none, alpha_degrees};
    if (setting == "mismatch-f") return MismatchSpec{MismatchTarget::evolution, alpha_degrees};
    if (setting == "mismatch-h") return MismatchSpec{MismatchTarget::observation, alpha_degrees};
    throw ConfigError("unknown setting '" + setting + "'");
}

ExperimentConfig parse_config_text(const std::string& text, const std::string& origin) {
    ExperimentConfig cfg = ExperimentConfig::defaults();
    std::istringstream stream(text);
    std::string raw_line;
    int line = 0;
    while (std::getline(stream, raw_line)) {
        ++line;
        const auto hash = raw_line.find('#');
        if (hash != std::string::npos) raw_line.erase(hash);
        const std::string content = trim(raw_line);
        if (content.empty()) continue;
        const auto eq = content.find('=');
        if (eq == std::string::npos) {
            fail(origin, line, "expected 'key = value', got '" + content + "'");
        }
        const std::string key = trim(content.substr(0, eq));
        const std::string value = trim(content.substr(eq + 1));

        if (key == "design.f") {
            cfg.design_f = parse_matrix(origin, line, key, value);
        } else if (key == "design.g") {
            cfg.design_g = parse_matrix(origin, line, key, value);
        } else if (key == "design.h") {
            cfg.design_h = parse_matrix(origin, line, key, value);
        } else if (key == "mismatch.target") {
            if (value == "none") {
                cfg.mismatch.target = MismatchTarget::none;
            } else if (value == "evolution") {
                cfg.mismatch.target = MismatchTarget::evolution;
            } else if (value == "observation") {
                cfg.mismatch.target = MismatchTarget::observation;
            } else {
                fail(origin, line, "mismatch.target must be none|evolution|observation");
            }
        } else if (key == "mismatch.alpha") {
            cfg.mismatch.alpha_degrees = parse_double(origin, line, key, value);
        } else if (key == "settings") {
            cfg.settings = split_tokens(value);
        } else if (key == "noise.sweep_db") {
            cfg.noise_sweep_db = parse_double_list(origin, line, key, value);
        } else if (key == "horizon") {
            cfg.cost.horizon = static_cast<int>(parse_int(origin, line, key, value));
        } else if (key == "cost.q_state") {
            cfg.cost.q_state = parse_matrix(origin, line, key, value);
        } else if (key == "cost.q_final") {
            cfg.cost.q_final = parse_matrix(origin, line, key, value);
        } else if (key == "cost.r_control") {
            cfg.cost.r_control = parse_matrix(origin, line, key, value);
        } else if (key == "cost.state_target") {
            cfg.cost.state_target = parse_vector(origin, line, key, value);
        } else if (key == "cost.control_target") {
            cfg.cost.control_target = parse_vector(origin, line, key, value);
        } else if (key == "init.x0") {
            cfg.x0 = parse_vector(origin, line, key, value);
        } else if (key == "init.train_sigma0") {
            cfg.train_sigma0 = parse_double(origin, line, key, value);
        } else if (key == "net.embed_dim") {
            cfg.arch.embed_dim = static_cast<int>(parse_int(origin, line, key, value));
        } else if (key == "net.hidden_dim") {
            cfg.arch.hidden_dim = static_cast<int>(parse_int(origin, line, key, value));
        } else if (key == "train.learning_rate") {
            cfg.train.learning_rate = parse_double(origin, line, key, value);
        } else if (key == "train.iterations") {
            cfg.train.iterations = static_cast<int>(parse_int(origin, line, key, value));
        } else if (key == "train.batch_size") {
            cfg.train.batch_size = static_cast<int>(parse_int(origin, line, key, value));
        } else if (key == "train.regularization") {
            cfg.train.regularization = parse_double(origin, line, key, value);
        } else if (key == "train.optimizer") {
            if (value == "adam") {
                cfg.train.optimizer = OptimizerKind::adaptive_moment;
            } else if (value == "sgd") {
                cfg.train.optimizer = OptimizerKind::plain_gradient;
            } else {
                fail(origin, line, "train.optimizer must be adam|sgd");
            }
        } else if (key == "train.seed") {
            cfg.train.seed = static_cast<uint64_t>(parse_int(origin, line, key, value));
        } else if (key == "train.checkpoint_every") {
            cfg.train.checkpoint_every = static_cast<int>(parse_int(origin, line, key, value));
        } else if (key == "train.clip_norm") {
            cfg.train.clip_norm = parse_double(origin, line, key, value);
        } else if (key == "train.threads") {
            cfg.train.threads = static_cast<int>(parse_int(origin, line, key, value));
        } else if (key == "test.seeds") {
            cfg.test_seeds = static_cast<int>(parse_int(origin, line, key, value));
        } else if (key == "seed") {
            cfg.seed = static_cast<uint64_t>(parse_int(origin, line, key, value));
        } else if (key == "out_dir") {
            cfg.out_dir = value;
        } else {
            fail(origin, line, "unknown key '" + key + "'");
        }
    }

    // dimensions may have changed; refresh dependent defaults the file
    // did not set explicitly
    const int m = cfg.design_f.rows();
    const int q = cfg.design_g.cols();
    const int n = cfg.design_h.rows();
    cfg.arch.state_dim = m;
    cfg.arch.obs_dim = n;
    if (cfg.cost.q_state.rows() != m && cfg.cost.q_state.rows() == 2 && m != 2) {
        // defaults were built for the 2-state design; rebuild
        const int horizon = cfg.cost.horizon;
        cfg.cost = QuadraticCost::identity_weights(m, q, horizon);
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError(path + ": cannot open configuration file");
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str(), path);
}

std::string results_csv(const ResultsTable& table) {
    std::string out = "setting,noise_db,controller,lqg_loss_db,state_mse_db,ci_halfwidth_db\n";
    for (const ResultRow& row : table.rows) {
        out += row.setting + ',' + format_double(row.noise_db) + ',' + row.controller + ',' +
               format_double(row.lqg_loss_db) + ',' + format_double(row.state_mse_db) + ',' +
               format_double(row.ci_halfwidth_db) + '\n';
    }
    return out;
}

std::string train_curve_csv(const TrainReport& report) {
    std::string out = "iteration,loss,loss_db,grad_norm\n";
    for (size_t i = 0; i < report.loss.size(); ++i) {
        out += std::to_string(i + 1) + ',' + format_double(report.loss[i]) + ',' +
               format_double(report.loss_db[i]) + ',' + format_double(report.grad_norm[i]) +
               '\n';
    }
    return out;
}

Evaluation evaluate_controller(const Controller& controller, const StateSpaceModel& truth,
                               const QuadraticCost& cost, const Matrix& x0, int n_seeds,
                               uint64_t base_seed, int threads) {
    std::vector<double> losses(n_seeds);
    std::vector<double> mses(n_seeds);
    const int workers =
        std::max(1, std::min(n_seeds, threads > 0
                                          ? threads
                                          : static_cast<int>(
                                                std::thread::hardware_concurrency())));
    std::vector<std::exception_ptr> errors(workers);
    auto run_range = [&](int worker) {
        try {
            for (int k = worker; k < n_seeds; k += workers) {
                Simulator sim(truth, CounterRng::derive(base_seed, k), x0);
                Trajectory traj = rollout(controller, sim, cost);
                losses[k] = lqg_loss(traj, cost);
                mses[k] = state_mse(traj);
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

    Evaluation eval;
    for (int k = 0; k < n_seeds; ++k) {
        eval.mean_loss += losses[k];
        eval.mean_mse += mses[k];
    }
    eval.mean_loss /= n_seeds;
    eval.mean_mse /= n_seeds;
    double var = 0.0;
    for (int k = 0; k < n_seeds; ++k) {
        const double d = losses[k] - eval.mean_loss;
        var += d * d;
    }
    var = n_seeds > 1 ? var / (n_seeds - 1) : 0.0;
    eval.ci_halfwidth = 1.96 * std::sqrt(var / n_seeds);
    eval.loss_db = to_db(eval.mean_loss);
    eval.mse_db = to_db(eval.mean_mse);
    // delta method: d(10 log10 m) = (10 / ln 10) dm / m
    eval.ci_halfwidth_db = 10.0 / std::log(10.0) * eval.ci_halfwidth / eval.mean_loss;
    return eval;
}

ResultsTable run_experiment(const ExperimentConfig& cfg, const CellSink& sink) {
    cfg.validate();
    ResultsTable table;
    for (size_t si = 0; si < cfg.settings.size(); ++si) {
        const std::string& setting = cfg.settings[si];
        const MismatchSpec spec = mismatch_for_setting(setting, cfg.mismatch.alpha_degrees);
        for (size_t ni = 0; ni < cfg.noise_sweep_db.size(); ++ni) {
            const double db = cfg.noise_sweep_db[ni];
            const NoiseSpec noise{db, db};
            const StateSpaceModel design = cfg.design_model(noise);
            const StateSpaceModel truth = apply_mismatch(design, spec);

            if (!cfg.quiet) {
                std::cerr << "[cell] setting=" << setting << " noise=" << format_double(db)
                          << " dB: training..." << std::endl;
            }
            TrainConfig cell_train = cfg.train;
            cell_train.seed = CounterRng::derive(cfg.train.seed, cell_tag(si, ni));
            const Matrix x0 = cfg.x0;
            const double sigma0 = cfg.train_sigma0;
            SimulatorFactory factory = [&truth, &x0, sigma0](uint64_t seed) {
                return Simulator(truth, seed, x0, sigma0);
            };
            TrainReport report =
                train(design, factory, cfg.cost, cfg.arch, cfg.x0, cell_train);

            const Controller mb = make_model_based_controller(design, cfg.cost, cfg.x0);
            const Controller learned =
                make_learned_controller(design, cfg.cost, cfg.x0, report.final_params);
            const uint64_t eval_seed =
                CounterRng::derive(CounterRng::derive(cfg.seed, 0xE7A1), cell_tag(si, ni));
            const Evaluation mb_eval = evaluate_controller(mb, truth, cfg.cost, cfg.x0,
                                                           cfg.test_seeds, eval_seed,
                                                           cfg.train.threads);
            const Evaluation ln_eval = evaluate_controller(learned, truth, cfg.cost, cfg.x0,
                                                           cfg.test_seeds, eval_seed,
                                                           cfg.train.threads);
            table.rows.push_back(ResultRow{setting, db, "model-based", mb_eval.loss_db,
                                           mb_eval.mse_db, mb_eval.ci_halfwidth_db});
            table.rows.push_back(ResultRow{setting, db, "learned", ln_eval.loss_db,
                                           ln_eval.mse_db, ln_eval.ci_halfwidth_db});
            if (!cfg.quiet) {
                std::cerr << "[cell] setting=" << setting << " noise=" << format_double(db)
                          << " dB: model-based " << format_double(mb_eval.loss_db)
                          << " dB, learned " << format_double(ln_eval.loss_db) << " dB"
                          << std::endl;
            }
            if (sink) {
                sink(CellArtifacts{setting, db, std::move(report)});
            }
        }
    }
    return table;
}

void run_trajectory_demo(const ExperimentConfig& cfg, const GainNetParams* pretrained) {
    cfg.validate();
    if (cfg.noise_sweep_db.empty()) {
        throw ConfigError("demo requires at least one noise level");
    }
    const double db = cfg.noise_sweep_db.front();
    const NoiseSpec noise{db, db};
    const StateSpaceModel design = cfg.design_model(noise);
    const StateSpaceModel truth = apply_mismatch(design, cfg.mismatch);

    GainNetParams learned_params;
    if (pretrained != nullptr) {
        learned_params = *pretrained;
    } else {
        if (!cfg.quiet) std::cerr << "[demo] training learned controller..." << std::endl;
        const Matrix x0 = cfg.x0;
        const double sigma0 = cfg.train_sigma0;
        SimulatorFactory factory = [&truth, &x0, sigma0](uint64_t seed) {
            return Simulator(truth, seed, x0, sigma0);
        };
        learned_params =
            train(design, factory, cfg.cost, cfg.arch, cfg.x0, cfg.train).final_params;
    }

    // truth-informed controller as the optimal reference trace
    const Controller optimal = make_model_based_controller(truth, cfg.cost, cfg.x0);
    const Controller mb = make_model_based_controller(design, cfg.cost, cfg.x0);
    const Controller learned =
        make_learned_controller(design, cfg.cost, cfg.x0, std::move(learned_params));

    std::filesystem::create_directories(cfg.out_dir);
    const uint64_t demo_seed = CounterRng::derive(cfg.seed, 0xDE30);
    auto export_one = [&](const Controller& controller, const std::string& name) {
        Simulator sim(truth, demo_seed, cfg.x0);
        Trajectory traj = rollout(controller, sim, cfg.cost);
        std::ofstream out(cfg.out_dir + "/trajectory_" + name + ".csv");
        write_trajectory_csv(out, traj);
    };
    export_one(optimal, "optimal");
    export_one(mb, "model_based");
    export_one(learned, "learned");
}

}  // namespace lqg
