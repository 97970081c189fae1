#pragma once

// Finite-difference verification of every differentiable operation, loss and
// the full temporal head.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "bvqa/tensor.hpp"

namespace bvqa {

// |analytic - numeric| / max(|analytic|, |numeric|, floor).
double gradient_relative_error(double analytic, double numeric, double floor = 1e-4);

// Compares the autodiff gradient of the scalar `objective` with central
// differences for every entry of every input (inputs must require grad).
// Returns the largest relative error.
double check_gradient(const std::function<Tensor()>& objective, const std::vector<Tensor>& inputs,
                      double h = 1e-5);

struct GradCheckOptions {
  std::size_t cases = 100;
  std::uint64_t seed = 0;
  double h = 1e-5;
  double tolerance = 1e-4;
};

struct GradCheckResult {
  std::string op;
  std::size_t cases = 0;
  double max_relative_error = 0.0;
  bool passed = false;
};

// Runs the suite; every op is checked on `cases` seeded random inputs drawn
// away from kinks and ties.
std::vector<GradCheckResult> run_gradcheck(const GradCheckOptions& options = {});

}  // namespace bvqa
