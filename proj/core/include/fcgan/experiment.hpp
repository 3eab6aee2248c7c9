#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fcgan/config.hpp"
#include "fcgan/evaluation.hpp"

namespace fcgan::experiment {

using eval::ConvergenceOptions;
using eval::ConvergenceReport;
using eval::ParzenResult;

std::string library_version();

/// `<output_dir>/seed_<seed>`.
std::filesystem::path run_dir_for(const ExperimentConfig& config, std::uint64_t seed);

/// step,epoch,source_d,source_g,class_d,class_g,total_d,total_g with
/// round-trip precision.
void write_losses_csv(const std::vector<StepRecord>& history, const std::filesystem::path& path);
std::vector<StepRecord> read_losses_csv(const std::filesystem::path& path);

/// Trains one seed into `run_dir`: config.json, manifest.json, losses.csv,
/// timing.json and checkpoints/. With `resume_from`, continues that checkpoint.
RunRecord train_run(const ExperimentConfig& config, std::uint64_t seed, const std::filesystem::path& run_dir,
                    const std::optional<std::filesystem::path>& resume_from = std::nullopt);

/// Trains every configured seed (or only `seed`); returns the run directories.
std::vector<std::filesystem::path> cmd_train(const std::filesystem::path& config_path,
                                             std::optional<std::uint64_t> seed = std::nullopt,
                                             const std::optional<std::filesystem::path>& resume_from = std::nullopt);

struct ScoreReport {
    double score = 0.0;
    double conditional_accuracy = 0.0;
    double scorer_accuracy = 0.0;
    double real_data_score = 0.0;  // ceiling: the same scorer on held-out real data
    std::size_t samples = 0;
};

struct EvalSummary {
    std::optional<ConvergenceReport> convergence;
    std::optional<ParzenResult> parzen;
    std::optional<ScoreReport> score;
    std::optional<std::filesystem::path> grid;
};

/// Scorer trained on the training split; throws if its held-out accuracy
/// falls below `eval.min_scorer_accuracy`.
Classifier train_scorer(const data::Splits& splits, const EvalConfig& eval, double* held_out_accuracy = nullptr);

/// Runs the selected evaluations on a run directory and writes
/// convergence.json, parzen.json, score.json and grid.png (grid.csv for
/// 2-d data). Everything except convergence needs checkpoints/final.ckpt.
EvalSummary cmd_eval(const std::filesystem::path& run_dir, const std::vector<Battery>& battery,
                     const Classifier* scorer = nullptr);

struct CompareRow {
    std::uint64_t seed = 0;
    Variant variant = Variant::fcgan;
    std::optional<std::size_t> convergence_epoch;
    std::optional<double> parzen_mean;
    std::optional<double> score;
};

struct CompareReport {
    std::vector<CompareRow> rows;
    std::optional<double> median_convergence_fc;  // none when the median run never converges
    std::optional<double> median_convergence_ac;
    std::optional<double> median_parzen_fc, median_parzen_ac;
    std::optional<double> median_score_fc, median_score_ac;
    std::size_t convergence_wins_fc = 0;  // seeds with FC epoch <= AC epoch
    std::size_t parzen_wins_fc = 0;       // seeds with FC mean >= AC mean
    std::size_t score_wins_fc = 0;
    std::size_t seeds = 0;
};

/// Aggregates per-seed rows; a run that never converges counts as infinitely late.
CompareReport aggregate(std::vector<CompareRow> rows);

/// Field paths where two configs differ, ignoring the variant and the seeds.
std::vector<std::string> differences_beyond_variant(const ExperimentConfig& a, const ExperimentConfig& b);

/// Trains and evaluates both variants on every seed under
/// `<output_dir>/compare`, writing per-seed JSON, report.json and report.csv.
CompareReport cmd_compare(const std::filesystem::path& config_path,
                          const std::optional<std::filesystem::path>& second_config,
                          const std::vector<std::uint64_t>& seeds);

/// Writes a sample grid (PNG, or CSV for 2-d data) from the run's final checkpoint.
std::filesystem::path cmd_sample(const std::filesystem::path& run_dir, std::size_t rows,
                                 std::optional<std::uint64_t> seed = std::nullopt,
                                 const std::optional<std::filesystem::path>& out = std::nullopt);

}  // namespace fcgan::experiment
