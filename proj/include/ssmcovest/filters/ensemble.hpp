#pragma once

#include "ssmcovest/core/types.hpp"

namespace ssmcovest::filters {

// Weighted particle approximation of a filter density at one cycle.
// particles is N_x x N_p (one particle per column); weights sum to 1.
struct Ensemble {
  Matrix particles;
  Vector weights;
  int cycle = 0;

  int size() const { return static_cast<int>(particles.cols()); }
  int dim() const { return static_cast<int>(particles.rows()); }

  static Ensemble uniform(Matrix particles, int cycle = 0);

  // Throws InvalidArgument unless N_p >= 1, weights are nonnegative,
  // weights.size() == N_p and they sum to 1 within 1e-12.
  void validate() const;

  Vector mean() const;
  // Weighted covariance about the weighted mean (normalized by 1, not N-1).
  Matrix covariance() const;
  double ess() const;
};

}  // namespace ssmcovest::filters
