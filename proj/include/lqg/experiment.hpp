#pragma once

#include <functional>
#include <string>
#include <vector>

#include "lqg/closed_loop.hpp"
#include "lqg/training.hpp"

namespace lqg {

// Benchmark configuration; parseable from a key = value file (see README
// for the key list). Defaults reproduce the benchmark protocol: the
// double-integrator design matrices, a 20-degree rotation mismatch, equal
// process/observation noise swept in dB.
struct ExperimentConfig {
    Matrix design_f;
    Matrix design_g;
    Matrix design_h;
    MismatchSpec mismatch;               // single-setting commands (train/demo/...)
    std::vector<std::string> settings;   // grid rows for reproduce
    std::vector<double> noise_sweep_db;  // sigma_w^2 = sigma_v^2 per level
    QuadraticCost cost;                  // includes horizon and targets
    Matrix x0;                           // deterministic evaluation start
    double train_sigma0 = 1.0;           // training x0 ~ N(x0, sigma0^2 I)
    GainNetArch arch;
    TrainConfig train;
    int test_seeds = 1000;
    uint64_t seed = 0;
    std::string out_dir = "out";
    bool quiet = false;

    static ExperimentConfig defaults();
    void validate() const;  // throws ConfigError on inconsistency

    StateSpaceModel design_model(const NoiseSpec& noise) const;
};

// Strict parser: unknown keys are rejected, missing optional keys fall back
// to defaults; errors carry the line number.
ExperimentConfig parse_config(const std::string& path);
ExperimentConfig parse_config_text(const std::string& text, const std::string& origin);

// Setting name ("matched", "mismatch-f", "mismatch-h") -> mismatch spec.
MismatchSpec mismatch_for_setting(const std::string& setting, double alpha_degrees);

struct ResultRow {
    std::string setting;
    double noise_db = 0.0;
    std::string controller;  // "model-based" or "learned"
    double lqg_loss_db = 0.0;
    double state_mse_db = 0.0;
    double ci_halfwidth_db = 0.0;  // 95% halfwidth of the mean loss, in dB
};

struct ResultsTable {
    std::vector<ResultRow> rows;
};

std::string results_csv(const ResultsTable& table);

// Monte-Carlo evaluation over fresh seeds with a deterministic x0; both
// controllers of a grid cell share the same seed list.
struct Evaluation {
    double mean_loss = 0.0;
    double mean_mse = 0.0;
    double ci_halfwidth = 0.0;  // raw units
    double loss_db = 0.0;
    double mse_db = 0.0;
    double ci_halfwidth_db = 0.0;
};

Evaluation evaluate_controller(const Controller& controller, const StateSpaceModel& truth,
                               const QuadraticCost& cost, const Matrix& x0, int n_seeds,
                               uint64_t base_seed, int threads = 0);

// Per-cell training artifacts handed to the caller (curves, checkpoints).
struct CellArtifacts {
    std::string setting;
    double noise_db = 0.0;
    TrainReport report;
};
using CellSink = std::function<void(const CellArtifacts&)>;

// Full grid: for every (setting, noise level), builds the ground truth,
// trains the learned controller, and evaluates both controllers on shared
// test seeds. Deterministic for a fixed config.
ResultsTable run_experiment(const ExperimentConfig& cfg, const CellSink& sink = {});

// Single-trajectory study (same seed for every controller): exports
// trajectory_optimal.csv, trajectory_model_based.csv, trajectory_learned.csv
// under cfg.out_dir. Uses cfg.mismatch and the first swept noise level.
// Trains the learned controller unless pretrained parameters are supplied.
void run_trajectory_demo(const ExperimentConfig& cfg,
                         const GainNetParams* pretrained = nullptr);

std::string train_curve_csv(const TrainReport& report);

}  // namespace lqg
