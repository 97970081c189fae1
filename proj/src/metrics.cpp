#include "bvqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bvqa/errors.hpp"
#include "json.hpp"

namespace bvqa {

namespace {

double mean_of(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(std::span<const double> v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void check_pair(const char* op, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(op) + ": length mismatch " + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()));
  }
  if (a.size() < 2) throw std::invalid_argument(std::string(op) + ": needs at least two samples");
}

// Logistic in normalized coordinates: params (b1, b2, b3, b4).
struct FitState {
  double b[4];
};

double fit_loss(const FitState& s, std::span<const double> x, std::span<const double> y, double* grad) {
  const double scale = std::abs(s.b[1]);
  const double sign = s.b[1] >= 0.0 ? 1.0 : -1.0;
  double loss = 0.0;
  if (grad) std::fill(grad, grad + 4, 0.0);
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = (x[i] - s.b[0]) / scale;
    const double sig = 1.0 / (1.0 + std::exp(-u));
    const double f = (s.b[2] - s.b[3]) * sig + s.b[3];
    const double r = f - y[i];
    loss += r * r / n;
    if (grad) {
      const double dsig = sig * (1.0 - sig);
      const double df_du = (s.b[2] - s.b[3]) * dsig;
      grad[0] += 2.0 * r / n * df_du * (-1.0 / scale);
      grad[1] += 2.0 * r / n * df_du * (-u / scale) * sign;
      grad[2] += 2.0 * r / n * sig;
      grad[3] += 2.0 * r / n * (1.0 - sig);
    }
  }
  return loss;
}

}  // namespace

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
  check_pair("pearson", a, b);
  const double ma = mean_of(a);
  const double mb = mean_of(b);
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return std::nullopt;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::optional<double> spearman(std::span<const double> a, std::span<const double> b) {
  check_pair("spearman", a, b);
  const auto ra = average_ranks(a);
  const auto rb = average_ranks(b);
  return pearson(ra, rb);
}

StandardLogistic fit_logistic(std::span<const double> predictions, std::span<const double> targets,
                              const LogisticFitOptions& options) {
  check_pair("fit_logistic", predictions, targets);
  const double mx = mean_of(predictions);
  const double sx = std_of(predictions);
  const double my = mean_of(targets);
  const double sy = std_of(targets);
  if (sx == 0.0 || sy == 0.0) throw NumericError("fit_logistic: zero variance input");

  // Fit in standardized coordinates, map back at the end.
  std::vector<double> x(predictions.size());
  std::vector<double> y(targets.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    x[i] = (predictions[i] - mx) / sx;
    y[i] = (targets[i] - my) / sy;
  }
  FitState s{{median_of(x), 1.0, *std::max_element(y.begin(), y.end()), *std::min_element(y.begin(), y.end())}};
  double grad[4];
  double loss = fit_loss(s, x, y, grad);
  double step = 1.0;
  for (int it = 0; it < options.iterations; ++it) {
    const double gnorm2 = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2] + grad[3] * grad[3];
    if (gnorm2 < 1e-30) break;
    step *= 2.0;
    bool improved = false;
    for (int tries = 0; tries < 60; ++tries) {
      FitState trial = s;
      for (int k = 0; k < 4; ++k) trial.b[k] -= step * grad[k];
      if (trial.b[1] == 0.0) trial.b[1] = 1e-12;
      const double trial_loss = fit_loss(trial, x, y, nullptr);
      if (std::isfinite(trial_loss) && trial_loss <= loss - 1e-4 * step * gnorm2) {
        s = trial;
        loss = fit_loss(s, x, y, grad);
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  StandardLogistic out;
  out.beta1 = mx + sx * s.b[0];
  out.beta2 = sx * std::abs(s.b[1]);
  out.beta3 = my + sy * s.b[2];
  out.beta4 = my + sy * s.b[3];
  return out;
}

EvalReport evaluate_predictions(std::span<const double> predictions, std::span<const double> mos,
                                std::span<const std::string> database_ids, const LogisticFitOptions& options) {
  if (predictions.size() != mos.size() || predictions.size() != database_ids.size()) {
    throw std::invalid_argument("evaluate: predictions, mos and database ids differ in length");
  }
  if (predictions.empty()) throw DataError("evaluate: nothing to evaluate");
  for (double p : predictions) {
    if (!std::isfinite(p)) throw NumericError("evaluate: non-finite prediction");
  }

  std::vector<std::string> order;
  for (const auto& id : database_ids) {
    if (std::find(order.begin(), order.end(), id) == order.end()) order.push_back(id);
  }
  EvalReport report;
  double w_srcc = 0.0, n_srcc = 0.0, w_plcc = 0.0, n_plcc = 0.0;
  for (const auto& db : order) {
    std::vector<double> p;
    std::vector<double> q;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      if (database_ids[i] == db) {
        p.push_back(predictions[i]);
        q.push_back(mos[i]);
      }
    }
    if (p.size() < 3) throw DataError("evaluate: database '" + db + "' has fewer than 3 videos");
    DatabaseMetrics m;
    m.database_id = db;
    m.n = p.size();
    const bool constant_pred = std::all_of(p.begin(), p.end(), [&](double v) { return v == p[0]; });
    const bool constant_mos = std::all_of(q.begin(), q.end(), [&](double v) { return v == q[0]; });
    if (constant_pred || constant_mos) {
      m.degenerate = true;
    } else {
      m.srcc = spearman(p, q);
      const auto raw = pearson(p, q);
      m.plcc = raw;
      m.logistic = fit_logistic(p, q, options);
      std::vector<double> fitted(p.size());
      for (std::size_t i = 0; i < p.size(); ++i) fitted[i] = m.logistic(p[i]);
      const auto fit_plcc = pearson(fitted, q);
      if (fit_plcc && (!raw || *fit_plcc >= *raw)) {
        m.plcc = fit_plcc;
        m.logistic_used = true;
      }
    }
    const double n = static_cast<double>(m.n);
    if (m.srcc) {
      w_srcc += n * *m.srcc;
      n_srcc += n;
    }
    if (m.plcc) {
      w_plcc += n * *m.plcc;
      n_plcc += n;
    }
    report.databases.push_back(std::move(m));
  }
  if (n_srcc > 0.0) report.weighted_srcc = w_srcc / n_srcc;
  if (n_plcc > 0.0) report.weighted_plcc = w_plcc / n_plcc;
  return report;
}

std::string EvalReport::to_json() const {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json dbs = json::array();
  for (const auto& m : databases) {
    dbs.push_back({{"database_id", m.database_id},
                   {"n", m.n},
                   {"srcc", opt(m.srcc)},
                   {"plcc", opt(m.plcc)},
                   {"srcc_defined", m.srcc.has_value()},
                   {"degenerate", m.degenerate},
                   {"logistic_used", m.logistic_used},
                   {"logistic", {m.logistic.beta1, m.logistic.beta2, m.logistic.beta3, m.logistic.beta4}}});
  }
  json doc = {{"databases", std::move(dbs)},
              {"weighted_srcc", opt(weighted_srcc)},
              {"weighted_plcc", opt(weighted_plcc)}};
  return doc.dump(2) + "\n";
}

}  // namespace bvqa
