#pragma once

#include <utility>

#include "ssmcovest/core/types.hpp"

namespace ssmcovest::core {

// Symmetric positive-definite matrix with its lower Cholesky factor cached.
// Immutable after construction, so instances are safe to share across threads.
class SpdMatrix {
 public:
  // Symmetrizes m, adds jitter on the diagonal and factorizes.
  // Throws NotPositiveDefinite when the factorization has a nonpositive pivot.
  static SpdMatrix from_matrix(const Matrix& m, double jitter = 0.0);

  // Like from_matrix, but retries once with an extra 1e-10 * max|diag| on the
  // diagonal before giving up. Used on estimator iterates, which can brush
  // the boundary of the cone with finite ensembles.
  static SpdMatrix from_matrix_with_retry(const Matrix& m, double jitter = 0.0);

  static SpdMatrix identity(int dim, double scale = 1.0);

  int dim() const { return static_cast<int>(values_.rows()); }
  const Matrix& values() const { return values_; }
  const Matrix& chol() const { return chol_; }

  double log_det() const;

  // cov^{-1} v
  Vector solve(const Vector& v) const;
  Matrix solve(const Matrix& m) const;
  Matrix inverse() const;

  // L^{-1} v: maps a residual into coordinates where cov is the identity.
  Vector whiten(const Vector& v) const;
  Matrix whiten(const Matrix& m) const;

  // L^{-T} v
  Vector whiten_adjoint(const Vector& v) const;

  // v^T cov^{-1} v
  double mahalanobis_sq(const Vector& v) const;

 private:
  SpdMatrix(Matrix values, Matrix chol)
      : values_(std::move(values)), chol_(std::move(chol)) {}

  Matrix values_;
  Matrix chol_;
};

// Free-function form of SpdMatrix::from_matrix.
SpdMatrix spd_from_matrix(const Matrix& m, double jitter = 0.0);

}  // namespace ssmcovest::core
