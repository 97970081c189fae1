#include "bvqa/ensemble.hpp"

#include <stdexcept>

#include "bvqa/errors.hpp"

namespace bvqa {

std::vector<double> ensemble(std::span<const double> scores_a, std::span<const double> scores_b, double kappa) {
  if (scores_a.size() != scores_b.size()) {
    throw DataError("ensemble: score lists differ in length (" + std::to_string(scores_a.size()) + " vs " +
                    std::to_string(scores_b.size()) + ")");
  }
  if (!(kappa >= 0.0 && kappa <= 1.0)) throw ConfigError("ensemble: kappa must lie in [0, 1]");
  std::vector<double> out(scores_a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = kappa * scores_a[i] + (1.0 - kappa) * scores_b[i];
  return out;
}

KappaSweep sweep_kappa(std::span<const double> scores_a, std::span<const double> scores_b,
                       std::span<const double> mos, std::span<const std::string> database_ids) {
  KappaSweep sweep;
  bool have_best = false;
  double best_srcc = 0.0;
  double best_plcc = 0.0;
  for (int step = 0; step <= 100; ++step) {
    const double kappa = step / 100.0;
    const auto scores = ensemble(scores_a, scores_b, kappa);
    EvalReport report = evaluate_predictions(scores, mos, database_ids);
    const double srcc = report.weighted_srcc.value_or(-2.0);
    const double plcc = report.weighted_plcc.value_or(-2.0);
    sweep.curve.emplace_back(kappa, srcc);
    if (!have_best || srcc > best_srcc || (srcc == best_srcc && plcc > best_plcc)) {
      have_best = true;
      best_srcc = srcc;
      best_plcc = plcc;
      sweep.best_kappa = kappa;
      sweep.best_report = std::move(report);
    }
  }
  return sweep;
}

}  // namespace bvqa
