#pragma once

#include <vector>

#include "bvqa/tensor.hpp"

namespace bvqa {

// Unbiased (N - 1) sample covariance of the rows of a [N x D] matrix, as a
// row-major D x D array.
std::vector<double> sample_covariance(const Tensor& features);

// CORAL distance ||C_a - C_b||_F^2 / (4 D^2) between two feature sets that
// share the feature dimension D. Each set needs at least two rows.
double coral_distance(const Tensor& features_a, const Tensor& features_b);

}  // namespace bvqa
