#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cefr/level.hpp"
#include "json.hpp"

namespace cefr {

// Effective gold level for a prediction: the prediction itself when it matches any
// gold label, otherwise the gold label nearest to it (ties to the lower level).
Level resolve_gold(Level pred, const LevelSet& gold);

struct EvalReport {
    int levels = kNumLevels;
    Eigen::MatrixXi confusion;  // rows: resolved gold, columns: predicted
    std::vector<double> per_level_f1;
    double macro_f1 = 0.0;
    double weighted_kappa = 0.0;
    long n = 0;
};

// Confusion matrix and F1 fields; weighted_kappa is left at 0.
EvalReport confusion_and_f1(std::span<const Level> preds, std::span<const LevelSet> golds,
                            int levels = kNumLevels);

double quadratic_weighted_kappa(std::span<const Level> preds, std::span<const LevelSet> golds,
                                int levels = kNumLevels);

// Full report: confusion, F1 and kappa.
EvalReport evaluate(std::span<const Level> preds, std::span<const LevelSet> golds,
                    int levels = kNumLevels);

double macro_f1(std::span<const Level> preds, std::span<const LevelSet> golds, int levels = kNumLevels);

struct MultiRunSummary {
    std::vector<double> raw_scores;
    std::vector<double> retained;
    double mean = 0.0;
    double ci95 = 0.0;
};

// Drops one maximal and one minimal score, then reports the mean of the rest with a
// Student-t 95% half-width.
MultiRunSummary multi_run_summary(std::span<const double> scores);

// Sample Pearson correlation. Throws std::invalid_argument on constant inputs.
double pearson(std::span<const double> a, std::span<const double> b);

nlohmann::json report_to_json(const EvalReport& report);
nlohmann::json summary_to_json(const MultiRunSummary& summary);

// One-row table: per-level F1 (%), average, kappa.
std::string format_report_table(const std::string& row_name, const EvalReport& report);
// Same layout over several runs, each cell "mean ± ci".
std::string format_multi_run_table(const std::string& row_name, std::span<const EvalReport> runs);

}  // namespace cefr
