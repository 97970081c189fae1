#include "bvqa/coral.hpp"

#include <Eigen/Core>

#include <stdexcept>

#include "bvqa/errors.hpp"

namespace bvqa {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_features(const Tensor& f, const char* name) {
  if (f.rank() != 2) throw std::invalid_argument(std::string("coral: ") + name + " must be [N x D]");
  if (f.dim(0) < 2) throw DataError(std::string("coral: ") + name + " needs at least two samples");
}

}  // namespace

std::vector<double> sample_covariance(const Tensor& features) {
  check_features(features, "features");
  const auto n = static_cast<Eigen::Index>(features.dim(0));
  const auto d = static_cast<Eigen::Index>(features.dim(1));
  Eigen::Map<const RowMatrix> x(features.data().data(), n, d);
  const RowMatrix centered = x.rowwise() - x.colwise().mean();
  std::vector<double> out(static_cast<std::size_t>(d * d));
  Eigen::Map<RowMatrix>(out.data(), d, d) = (centered.transpose() * centered) / static_cast<double>(n - 1);
  return out;
}

double coral_distance(const Tensor& features_a, const Tensor& features_b) {
  check_features(features_a, "set a");
  check_features(features_b, "set b");
  if (features_a.dim(1) != features_b.dim(1)) {
    throw DataError("coral: feature dimensions differ (" + std::to_string(features_a.dim(1)) + " vs " +
                    std::to_string(features_b.dim(1)) + ")");
  }
  const auto ca = sample_covariance(features_a);
  const auto cb = sample_covariance(features_b);
  double frob = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) {
    const double diff = ca[i] - cb[i];
    frob += diff * diff;
  }
  const double d = static_cast<double>(features_a.dim(1));
  return frob / (4.0 * d * d);
}

}  // namespace bvqa
