#include "bvqa/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "bvqa/errors.hpp"

namespace bvqa {

void zero_grad(ParamList& params) {
  for (auto& p : params) p.tensor.zero_grad();
}

Adam::Adam(ParamList params, AdamConfig config) : params_(std::move(params)), config_(config) {
  if (config_.weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  for (const auto& p : params_) {
    if (!p.tensor.requires_grad()) throw std::invalid_argument("Adam: parameter " + p.name + " does not require grad");
    first_moment_.emplace_back(p.tensor.numel(), 0.0);
    second_moment_.emplace_back(p.tensor.numel(), 0.0);
  }
}

void Adam::step(double lr) {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  for (const auto& p : params_) {
    for (double g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient for parameter " + p.name);
    }
  }
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& t = params_[k].tensor;
    auto values = t.mutable_data();
    const auto grad = t.grad();
    auto& m = first_moment_[k];
    auto& v = second_moment_[k];
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double g = grad.empty() ? 0.0 : grad[i];
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      values[i] -= lr * (m_hat / (std::sqrt(v_hat) + config_.epsilon) + config_.weight_decay * values[i]);
    }
  }
}

void Adam::zero_grad() { bvqa::zero_grad(params_); }

double StepSchedule::lr_at_epoch(int epoch) const {
  if (epoch < 1) throw std::invalid_argument("epochs are 1-based");
  if (every < 1) throw ConfigError("lr decay interval must be >= 1");
  return initial * std::pow(factor, static_cast<double>((epoch - 1) / every));
}

}  // namespace bvqa
