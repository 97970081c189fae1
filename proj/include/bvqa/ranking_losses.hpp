#pragma once

// List-wise fine-tuning objective: a learnable four-parameter logistic
// mapping, the PLCC loss on mapped scores, and an SRCC loss on differentiable
// soft ranks obtained by projecting onto the permutahedron.

#include <array>
#include <span>
#include <string>
#include <vector>

#include "bvqa/optim.hpp"
#include "bvqa/tensor.hpp"

namespace bvqa {

// Network form: gamma3 * sigmoid(gamma1 * q + gamma2) + gamma4.
struct LogisticParams {
  Tensor gamma1, gamma2, gamma3, gamma4;  // learnable scalars

  // (1, 0, 1, 0)
  static LogisticParams initial();
  static LogisticParams from_values(std::array<double, 4> gammas);
  std::array<double, 4> values() const;
  ParamList parameters(const std::string& prefix) const;
  LogisticParams clone() const;
};

// Standard VQEG form:
//   (beta3 - beta4) / (1 + exp(-(q - beta1) / |beta2|)) + beta4
struct StandardLogistic {
  double beta1 = 0.0;
  double beta2 = 1.0;
  double beta3 = 1.0;
  double beta4 = 0.0;

  double operator()(double q) const;
  // Equivalent network-form gammas; requires beta2 != 0.
  std::array<double, 4> network_form() const;
};

Tensor logistic_map(const Tensor& scores, const LogisticParams& params);

struct SoftRankConfig {
  double epsilon = 1.0;

  void validate() const;
};

// Euclidean projection of -s / epsilon onto the permutahedron of (1, ..., N).
// Rank 1 goes to the largest score. Differentiable almost everywhere.
Tensor soft_rank(const Tensor& scores, const SoftRankConfig& config);

// Descending 1-based ranks; ties broken by original index (earlier ranks first).
std::vector<double> hard_rank_descending(std::span<const double> values);

// Pool-adjacent-violators fit of a non-increasing sequence to y under squared
// loss. `blocks` receives the start index of every pooled block.
std::vector<double> isotonic_decreasing(std::span<const double> y, std::vector<std::size_t>* blocks = nullptr);

inline constexpr double kPlccGuard = 1e-12;

// (1 - r) / 2 with r the Pearson correlation of mapped scores and ground truth.
Tensor plcc_loss(const Tensor& mapped_scores, std::span<const double> targets);

// 1 - Pearson(soft_rank(scores), hard ranks of targets).
Tensor srcc_loss(const Tensor& scores, std::span<const double> targets, const SoftRankConfig& config);

Tensor mixed_loss(const Tensor& scores, std::span<const double> targets, const LogisticParams& logistic,
                  double lambda, const SoftRankConfig& config);

}  // namespace bvqa
