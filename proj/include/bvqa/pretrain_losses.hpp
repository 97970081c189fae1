#pragma once

// Pairwise quality-aware pre-training objective: Thurstone preference
// probabilities, the fidelity loss between ground-truth and predicted
// preferences, and a hinge regularizer on the predicted uncertainty.

#include <cstddef>
#include <string>
#include <vector>

#include "bvqa/optim.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/tensor.hpp"

namespace bvqa {

inline constexpr double kDefaultHingeMargin = 0.025;
inline constexpr double kDefaultHingeWeight = 1.0;

// Pr(s(x) >= s(y)) for independent Gaussian qualities.
double pair_probability(double mu_x, double mu_y, double sigma_x, double sigma_y);
Tensor pair_probability(const Tensor& mu_x, const Tensor& mu_y, const Tensor& sigma_x,
                        const Tensor& sigma_y);

// Elementwise 1 - sqrt(p q) - sqrt((1 - p)(1 - q)). Radicands are clamped at
// zero, and a clamped term contributes no gradient.
Tensor fidelity_loss(const Tensor& p_true, const Tensor& p_pred);

// max(0, eta - sign(sigma_true_x - sigma_true_y) * (sigma_pred_x - sigma_pred_y)).
Tensor std_hinge_loss(double sigma_true_x, double sigma_true_y, const Tensor& sigma_pred_x,
                      const Tensor& sigma_pred_y, double eta);

struct PairSample {
  std::string id_x;
  std::string id_y;
  std::vector<double> feat_x;
  std::vector<double> feat_y;
  double mu_x = 0.0;
  double mu_y = 0.0;
  double sigma_x = 0.0;
  double sigma_y = 0.0;
  double p = 0.5;
  int g = 1;
};

// Fills p and g from the (mu, sigma) fields. Throws DataError for equal
// sigmas, which must be filtered before training.
PairSample make_pair_sample(std::string id_x, std::string id_y, std::vector<double> feat_x,
                            std::vector<double> feat_y, double mu_x, double mu_y, double sigma_x,
                            double sigma_y);

struct QualityHeadOutput {
  Tensor mu;     // [B]
  Tensor sigma;  // [B], strictly positive
};

// Any differentiable frame-quality model with mean and std heads.
class FrameQualityModel {
 public:
  virtual ~FrameQualityModel() = default;
  // features: [B x D]
  virtual QualityHeadOutput forward(const Tensor& features) const = 0;
  virtual ParamList parameters() const = 0;
  virtual std::size_t input_dim() const = 0;
};

// Desk-scale stand-in for the image backbone: tanh MLP trunk shared by a
// linear mean head and a softplus std head.
class MlpQualityModel final : public FrameQualityModel {
 public:
  MlpQualityModel(std::size_t input_dim, std::vector<std::size_t> hidden_dims, Rng& rng);

  QualityHeadOutput forward(const Tensor& features) const override;
  ParamList parameters() const override;
  std::size_t input_dim() const override { return input_dim_; }

  // Parameters of the std head only (weight, bias).
  ParamList sigma_head_parameters() const;

 private:
  std::size_t input_dim_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
  Tensor mu_weight_, mu_bias_;
  Tensor sigma_weight_, sigma_bias_;
};

struct PretrainLossConfig {
  double eta = kDefaultHingeMargin;
  double nu = kDefaultHingeWeight;
};

struct PretrainBatchLoss {
  Tensor total;
  double fidelity = 0.0;  // batch mean of the fidelity term
  double hinge = 0.0;     // batch mean of the hinge term (before nu)
};

PretrainBatchLoss pretrain_batch_loss(const std::vector<PairSample>& batch,
                                      const FrameQualityModel& model,
                                      const PretrainLossConfig& config = {});

}  // namespace bvqa
