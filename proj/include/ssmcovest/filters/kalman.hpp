#pragma once

#include <vector>

#include "ssmcovest/core/spd_matrix.hpp"
#include "ssmcovest/core/types.hpp"

namespace ssmcovest::filters {

// x_k = A x_{k-1} + beta_k, y_k = H x_k + eps_k, x_0 ~ N(m0, P0).
struct GaussianStateSpace {
  Matrix transition;
  Matrix observation;
  core::SpdMatrix q;
  core::SpdMatrix r;
  Vector initial_mean;
  core::SpdMatrix initial_cov;

  int state_dim() const { return static_cast<int>(transition.rows()); }
  int obs_dim() const { return static_cast<int>(observation.rows()); }

  // Same system with a different model error covariance.
  GaussianStateSpace with_q(core::SpdMatrix new_q) const;

  void validate() const;
};

struct KalmanStep {
  Vector forecast_mean;
  Matrix forecast_cov;
  Vector mean;
  Matrix cov;
  double loglik_increment = 0.0;  // log p(y_k | y_{1:k-1})
};

// Predict with (A, Q), update with (H, R). Throws SingularInnovationCovariance
// when H P H^T + R is not positive definite.
KalmanStep kf_step(const Vector& mean, const Matrix& cov, const Vector& y,
                   const GaussianStateSpace& gss);

struct KalmanPass {
  Vector initial_mean;
  Matrix initial_cov;
  std::vector<KalmanStep> steps;  // k = 1..K
  double loglik = 0.0;
};

// Observations are columns: column k-1 holds y_k.
KalmanPass kalman_filter(const GaussianStateSpace& gss, const Matrix& observations);

struct SmootherResult {
  std::vector<Vector> means;    // k = 0..K
  std::vector<Matrix> covs;     // k = 0..K
  std::vector<Matrix> lag_one;  // lag_one[k] = Cov(x_k, x_{k-1} | y_{1:K}), k = 1..K; [0] empty
};

// Rauch-Tung-Striebel backward pass with lag-one covariances
// P_{k,k-1|K} = P_{k|K} J_{k-1}^T, J_{k-1} = P_{k-1|k-1} A^T P_{k|k-1}^{-1}.
SmootherResult rts_smoother(const KalmanPass& pass, const GaussianStateSpace& gss);

}  // namespace ssmcovest::filters
