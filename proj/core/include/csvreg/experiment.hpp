#pragma once

#include <optional>
#include <string>
#include <vector>

#include "csvreg/config.hpp"
#include "csvreg/dataset.hpp"
#include "csvreg/model.hpp"
#include "csvreg/trainer.hpp"

namespace csvreg {

/// Accuracy summary on one test set.
struct EvalResult {
    std::string tag;                      // e.g. "sigma=-0.99" or "random"
    double sigma_test = 0.0;              // NaN when not a toy shift
    std::vector<double> group_accuracy;   // K_y * K_z, NaN for empty cells
    std::vector<std::size_t> group_count; // test census
    std::size_t K_y = 0, K_z = 0;
    double avg_accuracy = 0.0;    // mean over populated groups
    double total_accuracy = 0.0;  // census-weighted
    double worst_accuracy = 0.0;  // min over populated groups
};

EvalResult evaluate_model(const ModelParams& params, const GroupedDataset& test,
                          const std::string& tag, double sigma_test);

struct SeedRun {
    std::uint64_t seed = 0;
    std::vector<EvalResult> evals;
    double empirical_csv_final = 0.0;    // NaN when attributes unobserved
    double csv_unobserved_final = 0.0;
    bool csv_u_small_class = false;  // some class has fewer than 10 samples
    std::optional<double> cosine_diag;
    std::vector<double> loss_trace;
    std::vector<double> penalty_trace;
    double wall_seconds = 0.0;
};

/// Per-method experiment output: one SeedRun per seed plus the config echo.
struct RunReport {
    std::string method;
    ExperimentConfig config;
    std::vector<SeedRun> runs;

    double mean_total_accuracy(std::size_t eval_index) const;
    double stddev_total_accuracy(std::size_t eval_index) const;
    double mean_cosine() const;  // NaN when absent
};

/// |cos(theta_2, mu_2)| where theta_2 is the trailing |mu_2|-block of the
/// linear model's weight column; nullopt when either vector is zero.
std::optional<double> cosine_similarity_diag(const ModelParams& params,
                                             const std::vector<double>& mu2);

/// Per-sample losses of a model over a whole dataset.
std::vector<double> dataset_losses(const ModelParams& params, const GroupedDataset& dataset);

/// Trains config.train.method for every seed and evaluates per shift. When
/// checkpoint_dir is nonempty, writes one checkpoint file per seed there.
RunReport run_experiment(const ExperimentConfig& config, const std::string& checkpoint_dir = "");

/// All in-scope methods x the sigma_test grid, plus the cosine diagnostic.
std::vector<RunReport> reproduce_toy_table(ExperimentConfig base);

std::string format_toy_table(const std::vector<RunReport>& reports);

/// Writes results.csv, metrics.json and config.echo under dir (created if
/// absent). results.csv bytes depend only on the report contents minus wall
/// clock, so identical runs produce identical files.
void emit_report(const std::vector<RunReport>& reports, const std::string& dir);

std::string report_to_json(const std::vector<RunReport>& reports);
std::vector<RunReport> report_from_json(const std::string& text);
std::string results_csv(const std::vector<RunReport>& reports);

/// Builds the training dataset for a config and seed.
GroupedDataset build_train_dataset(const ExperimentConfig& config, std::uint64_t seed);

}  // namespace csvreg
