#include "bvqa/ranking_losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "bvqa/errors.hpp"

namespace bvqa {

namespace {

std::vector<double> centered(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - m;
  return out;
}

double sum_squares(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return s;
}

bool is_constant(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [&](double x) { return x == v[0]; });
}

void check_list(const char* op, const Tensor& scores, std::span<const double> targets) {
  if (scores.rank() != 1) throw std::invalid_argument(std::string(op) + ": scores must be a vector");
  if (scores.numel() != targets.size()) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(scores.numel()) + " scores vs " +
                                std::to_string(targets.size()) + " targets");
  }
  if (targets.size() < 2) throw std::invalid_argument(std::string(op) + ": needs at least two items");
}

}  // namespace

// ---------------------------------------------------------------------------
// Logistic mapping

LogisticParams LogisticParams::initial() { return from_values({1.0, 0.0, 1.0, 0.0}); }

LogisticParams LogisticParams::from_values(std::array<double, 4> g) {
  return {Tensor::scalar(g[0], true), Tensor::scalar(g[1], true), Tensor::scalar(g[2], true),
          Tensor::scalar(g[3], true)};
}

std::array<double, 4> LogisticParams::values() const {
  return {gamma1.item(), gamma2.item(), gamma3.item(), gamma4.item()};
}

ParamList LogisticParams::parameters(const std::string& prefix) const {
  return {{prefix + ".gamma1", gamma1},
          {prefix + ".gamma2", gamma2},
          {prefix + ".gamma3", gamma3},
          {prefix + ".gamma4", gamma4}};
}

LogisticParams LogisticParams::clone() const { return from_values(values()); }

double StandardLogistic::operator()(double q) const {
  return (beta3 - beta4) / (1.0 + std::exp(-(q - beta1) / std::abs(beta2))) + beta4;
}

std::array<double, 4> StandardLogistic::network_form() const {
  if (beta2 == 0.0) throw std::invalid_argument("StandardLogistic: beta2 must be non-zero");
  const double scale = std::abs(beta2);
  return {1.0 / scale, -beta1 / scale, beta3 - beta4, beta4};
}

Tensor logistic_map(const Tensor& scores, const LogisticParams& p) {
  return p.gamma3 * sigmoid(p.gamma1 * scores + p.gamma2) + p.gamma4;
}

// ---------------------------------------------------------------------------
// Ranks

void SoftRankConfig::validate() const {
  if (!(epsilon > 0.0)) throw ConfigError("soft rank epsilon must be > 0");
}

std::vector<double> isotonic_decreasing(std::span<const double> y, std::vector<std::size_t>* blocks) {
  struct Block {
    double sum;
    std::size_t count;
    std::size_t start;
  };
  std::vector<Block> stack;
  stack.reserve(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    stack.push_back({y[i], 1, i});
    // A non-increasing fit needs each block mean above the next one.
    while (stack.size() >= 2) {
      const Block& last = stack.back();
      const Block& prev = stack[stack.size() - 2];
      if (prev.sum * static_cast<double>(last.count) > last.sum * static_cast<double>(prev.count)) break;
      Block merged{prev.sum + last.sum, prev.count + last.count, prev.start};
      stack.pop_back();
      stack.back() = merged;
    }
  }
  std::vector<double> out(y.size());
  if (blocks) blocks->clear();
  for (const Block& b : stack) {
    const double m = b.sum / static_cast<double>(b.count);
    std::fill_n(out.begin() + static_cast<std::ptrdiff_t>(b.start), b.count, m);
    if (blocks) blocks->push_back(b.start);
  }
  return out;
}

Tensor soft_rank(const Tensor& scores, const SoftRankConfig& config) {
  config.validate();
  if (scores.rank() != 1 || scores.numel() == 0) {
    throw std::invalid_argument("soft_rank: expected non-empty vector, got " + shape_str(scores.shape()));
  }
  const std::size_t n = scores.numel();
  const double eps = config.epsilon;
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = -scores[i] / eps;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });

  std::vector<double> sorted(n);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    sorted[i] = z[order[i]];
    y[i] = sorted[i] - static_cast<double>(n - i);
  }
  std::vector<std::size_t> blocks;
  const std::vector<double> fit = isotonic_decreasing(y, &blocks);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[order[i]] = sorted[i] - fit[i];

  blocks.push_back(n);
  return Tensor::make_result(
      "soft_rank", {n}, std::move(out), {scores},
      [eps, order = std::move(order), blocks = std::move(blocks)](std::span<const double> g,
                                                                     std::span<detail::Node* const> in) {
        detail::Node* ns = in[0];
        if (!ns->requires_grad) return;
        ns->ensure_grad();
        // The isotonic fit's Jacobian averages within each pooled block, so
        // d(rank)/dz = I - (block averaging) in sorted order.
        for (std::size_t b = 0; b + 1 < blocks.size(); ++b) {
          double avg = 0.0;
          for (std::size_t i = blocks[b]; i < blocks[b + 1]; ++i) avg += g[order[i]];
          avg /= static_cast<double>(blocks[b + 1] - blocks[b]);
          for (std::size_t i = blocks[b]; i < blocks[b + 1]; ++i) {
            ns->grad[order[i]] += -(g[order[i]] - avg) / eps;
          }
        }
      });
}

std::vector<double> hard_rank_descending(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size(); ++i) ranks[order[i]] = static_cast<double>(i + 1);
  return ranks;
}

// ---------------------------------------------------------------------------
// Losses

Tensor plcc_loss(const Tensor& mapped_scores, std::span<const double> targets) {
  check_list("plcc_loss", mapped_scores, targets);
  if (is_constant(targets)) throw DataError("plcc_loss: ground truth has zero variance");
  if (is_constant(mapped_scores.data())) throw NumericError("plcc_loss: predictions have zero variance");
  const std::vector<double> tc = centered(targets);
  const double target_norm = std::sqrt(sum_squares(tc) + kPlccGuard);
  const Tensor a = mapped_scores - mean(mapped_scores);
  const Tensor r = sum(a * Tensor::vector(tc)) / (sqrt(sum(square(a)) + kPlccGuard) * target_norm);
  return (1.0 - r) * 0.5;
}

Tensor srcc_loss(const Tensor& scores, std::span<const double> targets, const SoftRankConfig& config) {
  check_list("srcc_loss", scores, targets);
  const Tensor ranks = soft_rank(scores, config);
  if (is_constant(ranks.data())) throw NumericError("srcc_loss: soft ranks have zero variance");
  const std::vector<double> tc = centered(hard_rank_descending(targets));
  const double target_norm = std::sqrt(sum_squares(tc));
  const Tensor a = ranks - mean(ranks);
  const Tensor rho = sum(a * Tensor::vector(tc)) / (sqrt(sum(square(a))) * target_norm);
  return 1.0 - rho;
}

Tensor mixed_loss(const Tensor& scores, std::span<const double> targets, const LogisticParams& logistic,
                  double lambda, const SoftRankConfig& config) {
  if (!(lambda >= 0.0)) throw ConfigError("mixed_loss: lambda must be >= 0");
  const Tensor plcc = plcc_loss(logistic_map(scores, logistic), targets);
  if (lambda == 0.0) return plcc;
  return plcc + lambda * srcc_loss(scores, targets, config);
}

}  // namespace bvqa
