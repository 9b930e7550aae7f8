#include "ssmcovest/core/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "ssmcovest/errors.hpp"

namespace ssmcovest::core {

Matrix mvn_sample(const Vector& mean, const SpdMatrix& cov, RngStream& rng, int n) {
  if (mean.size() != cov.dim()) {
    throw DimensionMismatch("mvn_sample: mean has dim " + std::to_string(mean.size()) +
                            ", covariance has dim " + std::to_string(cov.dim()));
  }
  if (n < 0) throw InvalidArgument("mvn_sample: negative sample count");
  const Eigen::Index d = mean.size();
  Matrix z(d, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) z(i, j) = rng.normal();
  }
  Matrix out = cov.chol().triangularView<Eigen::Lower>() * z;
  out.colwise() += mean;
  return out;
}

double gaussian_logpdf(const Vector& x, const Vector& mean, const SpdMatrix& cov) {
  if (x.size() != mean.size() || x.size() != cov.dim()) {
    throw DimensionMismatch("gaussian_logpdf: dimension mismatch");
  }
  const double n = static_cast<double>(x.size());
  return -0.5 * n * std::log(2.0 * std::numbers::pi) - 0.5 * cov.log_det() -
         0.5 * cov.mahalanobis_sq(x - mean);
}

double log_sum_exp(std::span<const double> values) {
  double max_value = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (v > max_value) max_value = v;
  }
  if (!std::isfinite(max_value)) return max_value;
  double sum = 0.0;
  for (double v : values) sum += std::exp(v - max_value);
  return max_value + std::log(sum);
}

double normalize_log_weights(Vector& log_weights) {
  for (double& v : log_weights) {
    if (std::isnan(v)) v = -std::numeric_limits<double>::infinity();
  }
  const double total = log_sum_exp({log_weights.data(), static_cast<std::size_t>(log_weights.size())});
  if (!std::isfinite(total)) return -std::numeric_limits<double>::infinity();
  log_weights = (log_weights.array() - total).exp().matrix();
  // Renormalize once more so the sum is 1 to within a few ulps.
  log_weights /= log_weights.sum();
  return total;
}

double effective_sample_size(const Vector& weights) { return 1.0 / weights.squaredNorm(); }

}  // namespace ssmcovest::core
