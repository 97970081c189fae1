#pragma once

// Video quality head: linear dimension reduction, GRU recurrence, per-frame
// score projection, hysteresis temporal pooling and global averaging.

#include <cstddef>

#include "bvqa/optim.hpp"
#include "bvqa/rng.hpp"
#include "bvqa/tensor.hpp"

namespace bvqa {

inline constexpr std::size_t kFusedChannels = 4608;
inline constexpr std::size_t kDefaultReducedDim = 128;
inline constexpr std::size_t kDefaultHiddenSize = 32;

struct HeadConfig {
  std::size_t input_dim = kFusedChannels;
  std::size_t reduced_dim = kDefaultReducedDim;
  std::size_t hidden_size = kDefaultHiddenSize;

  void validate() const;
};

struct PoolingConfig {
  std::size_t tau = 12;  // memory duration in frames
  double beta = 0.5;     // weight of the memory term

  void validate() const;
};

// GRU gates in the update/reset/candidate form with sigmoid gates and a
// tanh candidate whose recurrent term sees the reset-gated state:
//   r = sigmoid(x W_r + b_r + h U_r)
//   z = sigmoid(x W_z + b_z + h U_z)
//   n = tanh(x W_n + b_n + (r * h) U_n)
//   h' = z * h + (1 - z) * n
struct GruParams {
  Tensor w_r, w_z, w_n;  // [input x hidden]
  Tensor u_r, u_z, u_n;  // [hidden x hidden]
  Tensor b_r, b_z, b_n;  // [hidden]
};

struct HeadParams {
  HeadConfig config;
  Tensor reduce_weight;  // [input_dim x reduced_dim]
  Tensor reduce_bias;    // [reduced_dim]
  GruParams gru;
  Tensor score_weight;  // [hidden x 1]
  Tensor score_bias;    // [1]

  // Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases.
  static HeadParams random(const HeadConfig& config, Rng& rng);
  static HeadParams zeros(const HeadConfig& config);

  ParamList parameters() const;
  // Deep copy with fresh parameter leaves.
  HeadParams clone() const;
};

// One recurrence step. x: [1 x input], h: [1 x hidden].
Tensor gru_cell(const Tensor& x, const Tensor& h, const GruParams& gru);

// features [T x input_dim] -> frame scores [T]; the initial state is zero.
Tensor head_forward(const Tensor& features, const HeadParams& params);

// Memory term: running minimum over the previous tau frames (the first frame
// uses itself). Current term: softmin-weighted average over the next tau
// frames including the current one. Output: beta * memory + (1 - beta) * current.
Tensor hysteresis_pool(const Tensor& frame_scores, const PoolingConfig& config);

// Arithmetic mean of the pooled scores.
Tensor video_score(const Tensor& pooled_scores);

// head_forward -> hysteresis_pool -> video_score.
Tensor predict_video(const Tensor& features, const HeadParams& params, const PoolingConfig& pooling);

}  // namespace bvqa
