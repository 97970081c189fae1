#pragma once

// Evaluation metrics: tie-aware Spearman, Pearson after a fitted
// four-parameter logistic, and per-database reports with size-weighted
// averages.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bvqa/ranking_losses.hpp"

namespace bvqa {

// Ascending 1-based ranks; tied values share their average rank.
std::vector<double> average_ranks(std::span<const double> values);

// nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> a, std::span<const double> b);
std::optional<double> spearman(std::span<const double> a, std::span<const double> b);

struct LogisticFitOptions {
  int iterations = 500;
};

// Least-squares fit of targets ~ StandardLogistic(predictions) by gradient
// descent with backtracking, started from data statistics.
StandardLogistic fit_logistic(std::span<const double> predictions, std::span<const double> targets,
                              const LogisticFitOptions& options = {});

struct DatabaseMetrics {
  std::string database_id;
  std::size_t n = 0;
  std::optional<double> srcc;  // nullopt: undefined (constant predictions)
  std::optional<double> plcc;
  bool degenerate = false;
  bool logistic_used = false;  // false when raw PLCC beat the fitted one
  StandardLogistic logistic;
};

struct EvalReport {
  std::vector<DatabaseMetrics> databases;
  std::optional<double> weighted_srcc;
  std::optional<double> weighted_plcc;

  std::string to_json() const;
};

// Groups by database id (first-appearance order). Each group needs N >= 3.
EvalReport evaluate_predictions(std::span<const double> predictions, std::span<const double> mos,
                                std::span<const std::string> database_ids, const LogisticFitOptions& options = {});

}  // namespace bvqa
