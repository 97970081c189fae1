#pragma once

#include <string>
#include <vector>

#include "bvqa/tensor.hpp"

namespace bvqa {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

void zero_grad(ParamList& params);

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled L2 decay: p -= lr * weight_decay * p on every step.
  double weight_decay = 0.0;
};

// Adam with bias-corrected moments.
class Adam {
 public:
  Adam(ParamList params, AdamConfig config);

  // Applies one update using the gradients currently stored on the
  // parameters. Throws NumericError naming the parameter if any gradient is
  // non-finite; in that case no parameter is modified.
  void step(double lr);
  void zero_grad();

  long steps_taken() const { return step_; }
  const ParamList& params() const { return params_; }

 private:
  ParamList params_;
  AdamConfig config_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  long step_ = 0;
};

// Step-decay schedule: initial * factor^floor((epoch - 1) / every), epochs 1-based.
struct StepSchedule {
  double initial = 5e-4;
  double factor = 0.2;
  int every = 2;

  double lr_at_epoch(int epoch) const;
};

}  // namespace bvqa
