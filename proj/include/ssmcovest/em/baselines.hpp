#pragma once

#include <optional>
#include <vector>

#include "ssmcovest/core/rng.hpp"
#include "ssmcovest/core/spd_matrix.hpp"
#include "ssmcovest/em/em_estimator.hpp"
#include "ssmcovest/filters/enkf.hpp"
#include "ssmcovest/filters/kalman.hpp"

namespace ssmcovest::em {

// Q_new = (1/K) sum_k E[(x_k - A x_{k-1})(x_k - A x_{k-1})^T | y_{1:K}]
// from the smoothed moments and lag-one covariances. Returned unvalidated.
Matrix shumway_stoffer_q_update(const filters::SmootherResult& smoothed,
                                const filters::GaussianStateSpace& gss);

// sum_k log p(y_k | y_{1:k-1}) for the system gss with model error q.
double incomplete_loglik_linear(const filters::GaussianStateSpace& gss, const Matrix& observations,
                                const core::SpdMatrix& q);

// EM with a Kalman filter / RTS smoother E-step. Only the EM fields and the
// structure of opts are used; fp_iterations stays 0 and log_evidence is the
// exact incomplete log-likelihood.
EmTrace em_kf_ks(const filters::GaussianStateSpace& gss, const Matrix& observations,
                 const core::SpdMatrix& q0, const EmOptions& opts);

struct EnsembleSmootherOptions {
  filters::EnkfOptions enkf;
  std::optional<int> lag;  // nullopt: smooth over the whole window
};

// One stochastic EnKF pass; cycle k draws from rng.split(k).
filters::EnkfRun run_enkf(const models::StateSpaceModel& model, const Matrix& observations,
                          const core::SpdMatrix& q, const core::SpdMatrix& r,
                          const filters::Ensemble& initial, const filters::EnkfOptions& opts,
                          const core::RngStream& rng);

// Q_new = (1/(K N_p)) sum_k sum_n (x^s_{k,n} - M(x^s_{k-1,n}))(...)^T over
// smoothed ensembles k = 0..K. Returned unvalidated.
Matrix ensemble_residual_covariance(const std::vector<filters::Ensemble>& smoothed,
                                    const models::StateSpaceModel& model);

// EM with an EnKF / EnKS E-step and the ensemble residual covariance M-step.
// log_evidence is the EnKF Gaussian innovation log-likelihood.
EmTrace em_enkf_enks(const models::StateSpaceModel& model, const Matrix& observations,
                     const core::SpdMatrix& q0, const core::SpdMatrix& r,
                     const filters::Ensemble& initial, const EmOptions& opts,
                     const core::RngStream& rng, const EnsembleSmootherOptions& smoother = {});

}  // namespace ssmcovest::em
