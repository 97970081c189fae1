#include "bvqa/temporal_head.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bvqa/errors.hpp"

namespace bvqa {

namespace {

Tensor uniform_param(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor clone_param(const Tensor& t) {
  return Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), true);
}

}  // namespace

void HeadConfig::validate() const {
  if (input_dim == 0 || reduced_dim == 0 || hidden_size == 0) {
    throw ConfigError("head dimensions must be positive");
  }
}

void PoolingConfig::validate() const {
  if (tau < 1) throw ConfigError("pooling tau must be >= 1");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("pooling beta must lie in [0, 1]");
}

HeadParams HeadParams::random(const HeadConfig& config, Rng& rng) {
  config.validate();
  const std::size_t in = config.input_dim;
  const std::size_t red = config.reduced_dim;
  const std::size_t h = config.hidden_size;
  HeadParams p;
  p.config = config;
  p.reduce_weight = uniform_param({in, red}, in, rng);
  p.reduce_bias = Tensor::zeros({red}, true);
  p.gru.w_r = uniform_param({red, h}, h, rng);
  p.gru.w_z = uniform_param({red, h}, h, rng);
  p.gru.w_n = uniform_param({red, h}, h, rng);
  p.gru.u_r = uniform_param({h, h}, h, rng);
  p.gru.u_z = uniform_param({h, h}, h, rng);
  p.gru.u_n = uniform_param({h, h}, h, rng);
  p.gru.b_r = Tensor::zeros({h}, true);
  p.gru.b_z = Tensor::zeros({h}, true);
  p.gru.b_n = Tensor::zeros({h}, true);
  p.score_weight = uniform_param({h, 1}, h, rng);
  p.score_bias = Tensor::zeros({1}, true);
  return p;
}

HeadParams HeadParams::zeros(const HeadConfig& config) {
  config.validate();
  const std::size_t in = config.input_dim;
  const std::size_t red = config.reduced_dim;
  const std::size_t h = config.hidden_size;
  HeadParams p;
  p.config = config;
  p.reduce_weight = Tensor::zeros({in, red}, true);
  p.reduce_bias = Tensor::zeros({red}, true);
  p.gru.w_r = Tensor::zeros({red, h}, true);
  p.gru.w_z = Tensor::zeros({red, h}, true);
  p.gru.w_n = Tensor::zeros({red, h}, true);
  p.gru.u_r = Tensor::zeros({h, h}, true);
  p.gru.u_z = Tensor::zeros({h, h}, true);
  p.gru.u_n = Tensor::zeros({h, h}, true);
  p.gru.b_r = Tensor::zeros({h}, true);
  p.gru.b_z = Tensor::zeros({h}, true);
  p.gru.b_n = Tensor::zeros({h}, true);
  p.score_weight = Tensor::zeros({h, 1}, true);
  p.score_bias = Tensor::zeros({1}, true);
  return p;
}

ParamList HeadParams::parameters() const {
  return {
      {"reduce.weight", reduce_weight}, {"reduce.bias", reduce_bias}, {"gru.w_r", gru.w_r},
      {"gru.w_z", gru.w_z},             {"gru.w_n", gru.w_n},         {"gru.u_r", gru.u_r},
      {"gru.u_z", gru.u_z},             {"gru.u_n", gru.u_n},         {"gru.b_r", gru.b_r},
      {"gru.b_z", gru.b_z},             {"gru.b_n", gru.b_n},         {"score.weight", score_weight},
      {"score.bias", score_bias},
  };
}

HeadParams HeadParams::clone() const {
  HeadParams p;
  p.config = config;
  p.reduce_weight = clone_param(reduce_weight);
  p.reduce_bias = clone_param(reduce_bias);
  p.gru.w_r = clone_param(gru.w_r);
  p.gru.w_z = clone_param(gru.w_z);
  p.gru.w_n = clone_param(gru.w_n);
  p.gru.u_r = clone_param(gru.u_r);
  p.gru.u_z = clone_param(gru.u_z);
  p.gru.u_n = clone_param(gru.u_n);
  p.gru.b_r = clone_param(gru.b_r);
  p.gru.b_z = clone_param(gru.b_z);
  p.gru.b_n = clone_param(gru.b_n);
  p.score_weight = clone_param(score_weight);
  p.score_bias = clone_param(score_bias);
  return p;
}

Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& gru) {
  const Tensor r = sigmoid(linear(x, gru.w_r, gru.b_r) + matmul(h, gru.u_r));
  const Tensor z = sigmoid(linear(x, gru.w_z, gru.b_z) + matmul(h, gru.u_z));
  const Tensor n = tanh(linear(x, gru.w_n, gru.b_n) + matmul(r * h, gru.u_n));
  return z * h + (1.0 - z) * n;
}

Tensor head_forward(const Tensor& features, const HeadParams& params) {
  const HeadConfig& cfg = params.config;
  if (features.rank() != 2 || features.dim(0) == 0) {
    throw std::invalid_argument("head_forward: expected [T x C] features with T >= 1, got " +
                                shape_str(features.shape()));
  }
  if (features.dim(1) != cfg.input_dim) {
    throw DataError("head_forward: feature channels " + std::to_string(features.dim(1)) +
                    " do not match head input " + std::to_string(cfg.input_dim));
  }
  const std::size_t steps = features.dim(0);
  const Tensor reduced = linear(features, params.reduce_weight, params.reduce_bias);

  // Input-side gate projections for all frames at once.
  const GruParams& g = params.gru;
  const Tensor xr = linear(reduced, g.w_r, g.b_r);
  const Tensor xz = linear(reduced, g.w_z, g.b_z);
  const Tensor xn = linear(reduced, g.w_n, g.b_n);

  Tensor h = Tensor::zeros({1, cfg.hidden_size});
  std::vector<Tensor> states;
  states.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor r = sigmoid(row(xr, t) + matmul(h, g.u_r));
    const Tensor z = sigmoid(row(xz, t) + matmul(h, g.u_z));
    const Tensor n = tanh(row(xn, t) + matmul(r * h, g.u_n));
    h = z * h + (1.0 - z) * n;
    states.push_back(h);
  }
  const Tensor hidden = concat(states, 0);
  return reshape(linear(hidden, params.score_weight, params.score_bias), {steps});
}

Tensor hysteresis_pool(const Tensor& frame_scores, const PoolingConfig& config) {
  config.validate();
  if (frame_scores.rank() != 1 || frame_scores.numel() == 0) {
    throw std::invalid_argument("hysteresis_pool: expected non-empty [T], got " +
                                shape_str(frame_scores.shape()));
  }
  const std::size_t steps = frame_scores.numel();
  const std::size_t tau = config.tau;
  std::vector<Tensor> pooled;
  pooled.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor memory =
        t == 0 ? element(frame_scores, 0) : min(slice(frame_scores, t > tau ? t - tau : 0, t));

    const std::size_t last = std::min(t + tau, steps - 1);
    const Tensor window = slice(frame_scores, t, last + 1);
    // Softmin weights are shift invariant; subtracting the window minimum
    // keeps every exponent <= 0.
    const Tensor shift = Tensor::scalar(window[argmin(window)]);
    const Tensor weights = exp(shift - window);
    const Tensor current = sum(weights * window) / sum(weights);

    pooled.push_back(config.beta * memory + (1.0 - config.beta) * current);
  }
  return stack(pooled);
}

Tensor video_score(const Tensor& pooled_scores) {
  if (pooled_scores.numel() == 0) throw std::invalid_argument("video_score: empty sequence");
  return mean(pooled_scores);
}

Tensor predict_video(const Tensor& features, const HeadParams& params, const PoolingConfig& pooling) {
  return video_score(hysteresis_pool(head_forward(features, params), pooling));
}

}  // namespace bvqa
