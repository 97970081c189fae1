#pragma once

#include <span>
#include <string>
#include <vector>

#include "bvqa/metrics.hpp"

namespace bvqa {

// kappa * a + (1 - kappa) * b, elementwise.
std::vector<double> ensemble(std::span<const double> scores_a, std::span<const double> scores_b, double kappa);

struct KappaSweep {
  double best_kappa = 1.0;
  EvalReport best_report;
  std::vector<std::pair<double, double>> curve;  // (kappa, weighted SRCC)
};

// Evaluates kappa = 0, 0.01, ..., 1 and keeps the highest weighted SRCC
// (weighted PLCC breaks ties, then the smaller kappa).
KappaSweep sweep_kappa(std::span<const double> scores_a, std::span<const double> scores_b,
                       std::span<const double> mos, std::span<const std::string> database_ids);

}  // namespace bvqa
