#include "bvqa/pretrain_losses.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bvqa/errors.hpp"

namespace bvqa {

namespace {

constexpr double kProbabilityTolerance = 1e-9;

void check_probabilities(const char* what, const Tensor& p) {
  for (double v : p.data()) {
    if (v < -kProbabilityTolerance || v > 1.0 + kProbabilityTolerance) {
      throw std::invalid_argument(std::string("fidelity_loss: ") + what + " outside [0,1]: " +
                                  std::to_string(v));
    }
  }
}

Tensor uniform_matrix(std::size_t rows, std::size_t cols, Rng& rng, bool requires_grad) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from({rows, cols}, std::move(v), requires_grad);
}

}  // namespace

double pair_probability(double mu_x, double mu_y, double sigma_x, double sigma_y) {
  const double var = sigma_x * sigma_x + sigma_y * sigma_y;
  if (!(var > 0.0)) throw NumericError("pair_probability: both standard deviations are zero");
  const double z = (mu_x - mu_y) / std::sqrt(var);
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

Tensor pair_probability(const Tensor& mu_x, const Tensor& mu_y, const Tensor& sigma_x,
                        const Tensor& sigma_y) {
  const Tensor var = square(sigma_x) + square(sigma_y);
  for (double v : var.data()) {
    if (!(v > 0.0)) throw NumericError("pair_probability: both standard deviations are zero");
  }
  return normal_cdf((mu_x - mu_y) / sqrt(var));
}

Tensor fidelity_loss(const Tensor& p_true, const Tensor& p_pred) {
  if (p_true.shape() != p_pred.shape()) {
    throw std::invalid_argument("fidelity_loss: shape mismatch " + shape_str(p_true.shape()) + " vs " +
                                shape_str(p_pred.shape()));
  }
  check_probabilities("p_true", p_true);
  check_probabilities("p_pred", p_pred);
  const std::size_t n = p_true.numel();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = p_true[i];
    const double q = p_pred[i];
    out[i] = 1.0 - (std::sqrt(std::max(0.0, p * q)) + std::sqrt(std::max(0.0, (1.0 - p) * (1.0 - q))));
  }
  // d/dq sqrt(p q) = p / (2 sqrt(p q)), and symmetrically for the complement.
  auto partial = [](double own, double other, double own_c, double other_c) {
    double d = 0.0;
    const double r1 = own * other;
    if (r1 > 0.0) d -= other / (2.0 * std::sqrt(r1));
    const double r2 = own_c * other_c;
    if (r2 > 0.0) d += other_c / (2.0 * std::sqrt(r2));
    return d;
  };
  return Tensor::make_result(
      "fidelity_loss", p_true.shape(), std::move(out), {p_true, p_pred},
      [n, partial](std::span<const double> g, std::span<detail::Node* const> in) {
        detail::Node* np = in[0];
        detail::Node* nq = in[1];
        for (std::size_t i = 0; i < n; ++i) {
          const double p = np->value[i];
          const double q = nq->value[i];
          if (np->requires_grad) {
            np->ensure_grad();
            np->grad[i] += g[i] * partial(p, q, 1.0 - p, 1.0 - q);
          }
          if (nq->requires_grad) {
            nq->ensure_grad();
            nq->grad[i] += g[i] * partial(q, p, 1.0 - q, 1.0 - p);
          }
        }
      });
}

Tensor std_hinge_loss(double sigma_true_x, double sigma_true_y, const Tensor& sigma_pred_x,
                      const Tensor& sigma_pred_y, double eta) {
  if (sigma_true_x == sigma_true_y) {
    throw DataError("std_hinge_loss: equal ground-truth standard deviations (pair should be filtered)");
  }
  if (!(eta > 0.0)) throw ConfigError("std_hinge_loss: margin must be > 0");
  const double g = sigma_true_x > sigma_true_y ? 1.0 : -1.0;
  return maximum(eta - g * (sigma_pred_x - sigma_pred_y), 0.0);
}

PairSample make_pair_sample(std::string id_x, std::string id_y, std::vector<double> feat_x,
                            std::vector<double> feat_y, double mu_x, double mu_y, double sigma_x,
                            double sigma_y) {
  if (sigma_x < 0.0 || sigma_y < 0.0) throw DataError("pair " + id_x + "/" + id_y + ": negative sigma");
  if (sigma_x == sigma_y) throw DataError("pair " + id_x + "/" + id_y + ": equal sigmas");
  PairSample s;
  s.p = pair_probability(mu_x, mu_y, sigma_x, sigma_y);
  s.g = sigma_x > sigma_y ? 1 : -1;
  s.id_x = std::move(id_x);
  s.id_y = std::move(id_y);
  s.feat_x = std::move(feat_x);
  s.feat_y = std::move(feat_y);
  s.mu_x = mu_x;
  s.mu_y = mu_y;
  s.sigma_x = sigma_x;
  s.sigma_y = sigma_y;
  return s;
}

// ---------------------------------------------------------------------------

MlpQualityModel::MlpQualityModel(std::size_t input_dim, std::vector<std::size_t> hidden_dims, Rng& rng)
    : input_dim_(input_dim) {
  if (input_dim == 0) throw ConfigError("MlpQualityModel: input_dim must be > 0");
  std::size_t prev = input_dim;
  for (std::size_t h : hidden_dims) {
    if (h == 0) throw ConfigError("MlpQualityModel: hidden width must be > 0");
    weights_.push_back(uniform_matrix(prev, h, rng, true));
    biases_.push_back(Tensor::zeros({h}, true));
    prev = h;
  }
  mu_weight_ = uniform_matrix(prev, 1, rng, true);
  mu_bias_ = Tensor::zeros({1}, true);
  sigma_weight_ = uniform_matrix(prev, 1, rng, true);
  sigma_bias_ = Tensor::zeros({1}, true);
}

QualityHeadOutput MlpQualityModel::forward(const Tensor& features) const {
  if (features.rank() != 2 || features.dim(1) != input_dim_) {
    throw std::invalid_argument("MlpQualityModel: expected [B x " + std::to_string(input_dim_) + "], got " +
                                shape_str(features.shape()));
  }
  Tensor h = features;
  for (std::size_t i = 0; i < weights_.size(); ++i) h = tanh(linear(h, weights_[i], biases_[i]));
  const std::size_t b = features.dim(0);
  Tensor mu = reshape(linear(h, mu_weight_, mu_bias_), {b});
  Tensor sigma = reshape(softplus(linear(h, sigma_weight_, sigma_bias_)), {b});
  return {mu, sigma};
}

ParamList MlpQualityModel::parameters() const {
  ParamList out;
  for (std::size_t i = 0; i < weights_.size(); ++i) {
    out.push_back({"trunk." + std::to_string(i) + ".weight", weights_[i]});
    out.push_back({"trunk." + std::to_string(i) + ".bias", biases_[i]});
  }
  out.push_back({"mu_head.weight", mu_weight_});
  out.push_back({"mu_head.bias", mu_bias_});
  for (auto& p : sigma_head_parameters()) out.push_back(p);
  return out;
}

ParamList MlpQualityModel::sigma_head_parameters() const {
  return {{"sigma_head.weight", sigma_weight_}, {"sigma_head.bias", sigma_bias_}};
}

// ---------------------------------------------------------------------------

PretrainBatchLoss pretrain_batch_loss(const std::vector<PairSample>& batch,
                                      const FrameQualityModel& model,
                                      const PretrainLossConfig& config) {
  if (batch.empty()) throw std::invalid_argument("pretrain_batch_loss: empty batch");
  if (!(config.eta > 0.0)) throw ConfigError("pretrain_batch_loss: eta must be > 0");
  const std::size_t b = batch.size();
  const std::size_t d = model.input_dim();

  // Both members of every pair go through the model as one [2B x D] matrix.
  std::vector<double> feats;
  feats.reserve(2 * b * d);
  for (const auto& s : batch) {
    if (s.feat_x.size() != d) throw DataError("pair " + s.id_x + ": feature length mismatch");
    feats.insert(feats.end(), s.feat_x.begin(), s.feat_x.end());
  }
  for (const auto& s : batch) {
    if (s.feat_y.size() != d) throw DataError("pair " + s.id_y + ": feature length mismatch");
    feats.insert(feats.end(), s.feat_y.begin(), s.feat_y.end());
  }
  const QualityHeadOutput out = model.forward(Tensor::from({2 * b, d}, std::move(feats)));
  const Tensor mu = reshape(out.mu, {2 * b, 1});
  const Tensor sigma = reshape(out.sigma, {2 * b, 1});
  const Tensor mu_x = reshape(slice(mu, 0, b), {b});
  const Tensor mu_y = reshape(slice(mu, b, 2 * b), {b});
  const Tensor sigma_x = reshape(slice(sigma, 0, b), {b});
  const Tensor sigma_y = reshape(slice(sigma, b, 2 * b), {b});

  std::vector<double> p_true(b);
  std::vector<double> signs(b);
  for (std::size_t i = 0; i < b; ++i) {
    const auto& s = batch[i];
    if (s.sigma_x == s.sigma_y) throw DataError("pair " + s.id_x + "/" + s.id_y + ": equal sigmas");
    p_true[i] = s.p;
    signs[i] = s.sigma_x > s.sigma_y ? 1.0 : -1.0;
  }
  const Tensor p_pred = pair_probability(mu_x, mu_y, sigma_x, sigma_y);
  const Tensor fidelity = mean(fidelity_loss(Tensor::vector(std::move(p_true)), p_pred));
  const Tensor hinge =
      mean(maximum(config.eta - Tensor::vector(std::move(signs)) * (sigma_x - sigma_y), 0.0));

  PretrainBatchLoss result;
  result.fidelity = fidelity.item();
  result.hinge = hinge.item();
  result.total = config.nu == 0.0 ? fidelity : fidelity + config.nu * hinge;
  return result;
}

}  // namespace bvqa
