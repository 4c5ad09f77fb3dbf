// Benchmark harness for the stochastic-control toolkit.
//
// Subcommands:
//   simulate    closed-loop rollout, trajectory CSV export
//   train       single-cell training, curve + checkpoint export
//   evaluate    load a checkpoint and score it against the model-based baseline
//   grad-check  tape gradient vs. central finite differences
//   reproduce   full benchmark grid -> results.csv
//   demo        single-trajectory study (optimal / model-based / learned)
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lqg/experiment.hpp"
#include "lqg/rng.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonFlags {
    std::string config_path;
    std::string out_dir;
    std::optional<uint64_t> seed;
    std::optional<std::string> setting;
    std::vector<double> noise_db;
    bool quiet = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags* flags) {
    cmd->add_option("--config", flags->config_path, "configuration file (key = value)");
    cmd->add_option("--out", flags->out_dir, "output directory");
    cmd->add_option("--seed", flags->seed, "base seed (also seeds training)");
    cmd->add_option("--setting", flags->setting, "matched|mismatch-f|mismatch-h")
        ->check(CLI::IsMember({"matched", "mismatch-f", "mismatch-h"}));
    cmd->add_option("--noise-db", flags->noise_db, "noise levels in dB (overrides sweep)");
    cmd->add_flag("--quiet", flags->quiet, "suppress progress output");
}

lqg::ExperimentConfig load_config(const CommonFlags& flags) {
    lqg::ExperimentConfig cfg = flags.config_path.empty()
                                    ? lqg::ExperimentConfig::defaults()
                                    : lqg::parse_config(flags.config_path);
    if (flags.seed.has_value()) {
        cfg.seed = *flags.seed;
        cfg.train.seed = *flags.seed;
    }
    if (flags.setting.has_value()) {
        cfg.settings = {*flags.setting};
        cfg.mismatch = lqg::mismatch_for_setting(*flags.setting, cfg.mismatch.alpha_degrees);
    }
    if (!flags.noise_db.empty()) {
        cfg.noise_sweep_db = flags.noise_db;
    }
    if (!flags.out_dir.empty()) {
        cfg.out_dir = flags.out_dir;
    }
    cfg.quiet = cfg.quiet || flags.quiet;
    cfg.validate();
    return cfg;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open " + path + " for writing");
    }
    out << content;
}

double first_noise_level(const lqg::ExperimentConfig& cfg) {
    if (cfg.noise_sweep_db.empty()) {
        throw lqg::ConfigError("this command needs at least one noise level (--noise-db)");
    }
    return cfg.noise_sweep_db.front();
}

// Ground truth and design for the config's single-setting commands.
struct Cell {
    lqg::StateSpaceModel design;
    lqg::StateSpaceModel truth;
    double noise_db;
};

Cell make_cell(const lqg::ExperimentConfig& cfg) {
    const double db = first_noise_level(cfg);
    const lqg::NoiseSpec noise{db, db};
    lqg::StateSpaceModel design = cfg.design_model(noise);
    lqg::StateSpaceModel truth = lqg::apply_mismatch(design, cfg.mismatch);
    return Cell{std::move(design), std::move(truth), db};
}

lqg::SimulatorFactory training_factory(const Cell& cell, const lqg::ExperimentConfig& cfg) {
    const lqg::StateSpaceModel truth = cell.truth;
    const lqg::Matrix x0 = cfg.x0;
    const double sigma0 = cfg.train_sigma0;
    return [truth, x0, sigma0](uint64_t seed) {
        return lqg::Simulator(truth, seed, x0, sigma0);
    };
}

int cmd_simulate(const CommonFlags& flags, const std::string& checkpoint_path) {
    lqg::ExperimentConfig cfg = load_config(flags);
    const Cell cell = make_cell(cfg);
    std::filesystem::create_directories(cfg.out_dir);

    auto export_one = [&](const lqg::Controller& controller, const std::string& name) {
        lqg::Simulator sim(cell.truth, lqg::CounterRng::derive(cfg.seed, 0x51), cfg.x0);
        lqg::Trajectory traj = lqg::rollout(controller, sim, cfg.cost);
        std::ofstream out(cfg.out_dir + "/trajectory_" + name + ".csv");
        lqg::write_trajectory_csv(out, traj);
        if (!cfg.quiet) {
            std::cout << name << ": lqg_loss_db="
                      << lqg::to_db(lqg::lqg_loss(traj, cfg.cost)) << "\n";
        }
    };
    export_one(lqg::make_model_based_controller(cell.design, cfg.cost, cfg.x0), "model_based");
    if (!checkpoint_path.empty()) {
        lqg::Checkpoint ckpt = lqg::load_checkpoint(checkpoint_path);
        export_one(
            lqg::make_learned_controller(cell.design, cfg.cost, cfg.x0, std::move(ckpt.params)),
            "learned");
    }
    return 0;
}

int cmd_train(const CommonFlags& flags) {
    lqg::ExperimentConfig cfg = load_config(flags);
    const Cell cell = make_cell(cfg);
    std::filesystem::create_directories(cfg.out_dir);

    lqg::TrainConfig train_cfg = cfg.train;
    if (train_cfg.checkpoint_every > 0 && train_cfg.checkpoint_dir.empty()) {
        train_cfg.checkpoint_dir = cfg.out_dir;
    }
    lqg::TrainReport report = lqg::train(cell.design, training_factory(cell, cfg), cfg.cost,
                                         cfg.arch, cfg.x0, train_cfg);
    write_file(cfg.out_dir + "/train_curve.csv", lqg::train_curve_csv(report));
    lqg::save_checkpoint(cfg.out_dir + "/checkpoint_final.txt", report.final_params,
                         train_cfg.seed);
    if (!cfg.quiet) {
        std::cout << "trained " << report.loss.size() << " iterations in "
                  << report.wall_time_seconds << " s; final loss_db="
                  << (report.loss_db.empty() ? 0.0 : report.loss_db.back()) << "\n";
    }
    return 0;
}

int cmd_evaluate(const CommonFlags& flags, const std::string& checkpoint_path) {
    lqg::ExperimentConfig cfg = load_config(flags);
    const Cell cell = make_cell(cfg);
    lqg::Checkpoint ckpt = lqg::load_checkpoint(checkpoint_path);

    const lqg::Controller mb = lqg::make_model_based_controller(cell.design, cfg.cost, cfg.x0);
    const lqg::Controller learned =
        lqg::make_learned_controller(cell.design, cfg.cost, cfg.x0, std::move(ckpt.params));
    const uint64_t eval_seed = lqg::CounterRng::derive(cfg.seed, 0xE7A1);
    const lqg::Evaluation mb_eval = lqg::evaluate_controller(
        mb, cell.truth, cfg.cost, cfg.x0, cfg.test_seeds, eval_seed, cfg.train.threads);
    const lqg::Evaluation ln_eval = lqg::evaluate_controller(
        learned, cell.truth, cfg.cost, cfg.x0, cfg.test_seeds, eval_seed, cfg.train.threads);

    lqg::ResultsTable table;
    const std::string setting = cfg.settings.size() == 1 ? cfg.settings.front() : "custom";
    table.rows.push_back(lqg::ResultRow{setting, cell.noise_db, "model-based", mb_eval.loss_db,
                                        mb_eval.mse_db, mb_eval.ci_halfwidth_db});
    table.rows.push_back(lqg::ResultRow{setting, cell.noise_db, "learned", ln_eval.loss_db,
                                        ln_eval.mse_db, ln_eval.ci_halfwidth_db});
    std::cout << lqg::results_csv(table);
    return 0;
}

int cmd_grad_check(const CommonFlags& flags) {
    lqg::ExperimentConfig cfg = load_config(flags);
    const Cell cell = make_cell(cfg);
    const lqg::GainNetParams params =
        lqg::init_params(cfg.arch, lqg::CounterRng::derive(cfg.train.seed, 0));
    const double err = lqg::grad_check(cell.design, training_factory(cell, cfg), cfg.cost,
                                       params, cfg.x0, 8, 1e-6,
                                       lqg::CounterRng::derive(cfg.seed, 0x6c));
    std::cout << "max_relative_error=" << err << "\n";
    if (!(err < 1e-4)) {
        std::cerr << "gradient check FAILED (threshold 1e-4)\n";
        return kExitNumeric;
    }
    return 0;
}

int cmd_reproduce(const CommonFlags& flags) {
    lqg::ExperimentConfig cfg = load_config(flags);
    std::filesystem::create_directories(cfg.out_dir);
    auto sink = [&cfg](const lqg::CellArtifacts& cell) {
        const std::string stem =
            cell.setting + "_" + std::to_string(static_cast<int>(cell.noise_db)) + "db";
        write_file(cfg.out_dir + "/train_curve_" + stem + ".csv",
                   lqg::train_curve_csv(cell.report));
        lqg::save_checkpoint(cfg.out_dir + "/checkpoint_" + stem + ".txt",
                             cell.report.final_params, cfg.train.seed);
    };
    const lqg::ResultsTable table = lqg::run_experiment(cfg, sink);
    write_file(cfg.out_dir + "/results.csv", lqg::results_csv(table));
    if (!cfg.quiet) {
        std::cout << lqg::results_csv(table);
    }
    return 0;
}

int cmd_demo(const CommonFlags& flags, const std::string& checkpoint_path) {
    lqg::ExperimentConfig cfg = load_config(flags);
    if (!flags.setting.has_value() && cfg.mismatch.target == lqg::MismatchTarget::none &&
        flags.config_path.empty()) {
        // the single-trajectory study is about the mismatched loop by default
        cfg.mismatch = lqg::mismatch_for_setting("mismatch-f", cfg.mismatch.alpha_degrees);
    }
    if (checkpoint_path.empty()) {
        lqg::run_trajectory_demo(cfg);
    } else {
        lqg::Checkpoint ckpt = lqg::load_checkpoint(checkpoint_path);
        lqg::run_trajectory_demo(cfg, &ckpt.params);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stochastic-control benchmark harness"};
    app.require_subcommand(1);

    CommonFlags flags;
    std::string checkpoint_path;

    CLI::App* simulate = app.add_subcommand("simulate", "rollout and export trajectories");
    add_common_flags(simulate, &flags);
    simulate->add_option("--checkpoint", checkpoint_path, "learned-gain checkpoint to include");

    CLI::App* train = app.add_subcommand("train", "train the learned gain on one cell");
    add_common_flags(train, &flags);

    CLI::App* evaluate = app.add_subcommand("evaluate", "score a checkpoint on test seeds");
    add_common_flags(evaluate, &flags);
    evaluate->add_option("--checkpoint", checkpoint_path, "checkpoint to evaluate")
        ->required();

    CLI::App* grad = app.add_subcommand("grad-check", "verify rollout gradients");
    add_common_flags(grad, &flags);

    CLI::App* reproduce = app.add_subcommand("reproduce", "run the full benchmark grid");
    add_common_flags(reproduce, &flags);

    CLI::App* demo = app.add_subcommand("demo", "single-trajectory study");
    add_common_flags(demo, &flags);
    demo->add_option("--checkpoint", checkpoint_path, "reuse a trained checkpoint");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(flags, checkpoint_path);
        if (train->parsed()) return cmd_train(flags);
        if (evaluate->parsed()) return cmd_evaluate(flags, checkpoint_path);
        if (grad->parsed()) return cmd_grad_check(flags);
        if (reproduce->parsed()) return cmd_reproduce(flags);
        if (demo->parsed()) return cmd_demo(flags, checkpoint_path);
    } catch (const lqg::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    }
    return 0;
}
