#include "ssmcovest/filters/ensemble.hpp"

#include <cmath>

#include "ssmcovest/core/gaussian.hpp"
#include "ssmcovest/errors.hpp"

namespace ssmcovest::filters {

Ensemble Ensemble::uniform(Matrix particles, int cycle) {
  if (particles.cols() < 1) throw InvalidArgument("Ensemble: need at least one particle");
  const auto n = particles.cols();
  return Ensemble{std::move(particles), Vector::Constant(n, 1.0 / static_cast<double>(n)), cycle};
}

void Ensemble::validate() const {
  if (particles.cols() < 1) throw InvalidArgument("Ensemble: need at least one particle");
  if (weights.size() != particles.cols()) throw InvalidArgument("Ensemble: weights size != N_p");
  if ((weights.array() < 0.0).any() || !weights.allFinite()) {
    throw InvalidArgument("Ensemble: weights must be finite and nonnegative");
  }
  if (std::abs(weights.sum() - 1.0) > 1e-12) throw InvalidArgument("Ensemble: weights do not sum to 1");
}

Vector Ensemble::mean() const { return particles * weights; }

Matrix Ensemble::covariance() const {
  const Matrix centered = particles.colwise() - mean();
  return centered * weights.asDiagonal() * centered.transpose();
}

double Ensemble::ess() const { return core::effective_sample_size(weights); }

}  // namespace ssmcovest::filters
