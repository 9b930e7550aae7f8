#pragma once

#include <optional>
#include <vector>

#include "ssmcovest/core/rng.hpp"
#include "ssmcovest/core/spd_matrix.hpp"
#include "ssmcovest/filters/ensemble.hpp"
#include "ssmcovest/models/state_space_model.hpp"

namespace ssmcovest::filters {

struct EnkfOptions {
  // Multiplicative inflation of the forecast anomalies (1 = off).
  double inflation = 1.0;
};

struct EnkfStepResult {
  Ensemble analysis;           // uniform weights
  Matrix forecast;             // N_x x N_p
  Matrix obs_anomalies;        // H(x^f_n) - mean, M x N_p
  Matrix scaled_innovations;   // C_yy^{-1} (y + eps_n - H(x^f_n)), M x N_p
  double log_evidence = 0.0;   // Gaussian innovation log-likelihood
};

// Stochastic EnKF cycle with perturbed observations. Requires N_p >= 2.
// Throws SingularInnovationCovariance when C_yy = HPH^T + R is not PD.
EnkfStepResult enkf_assimilate(const Ensemble& prev, const Vector& y,
                               const models::StateSpaceModel& model, const core::SpdMatrix& q,
                               const core::SpdMatrix& r, core::RngStream& rng,
                               const EnkfOptions& opts = {});

Ensemble enkf_step(const Ensemble& ens, const Vector& y, const models::StateSpaceModel& model,
                   const core::SpdMatrix& q, const core::SpdMatrix& r, core::RngStream& rng,
                   const EnkfOptions& opts = {});

// Stored products of a full EnKF pass, as needed by the smoother.
struct EnkfRun {
  std::vector<Ensemble> analyses;             // k = 0..K (analyses[0] is the initial ensemble)
  std::vector<Matrix> obs_anomalies;          // k = 1..K at index k-1
  std::vector<Matrix> scaled_innovations;     // k = 1..K at index k-1
  double log_evidence = 0.0;

  int cycles() const { return static_cast<int>(obs_anomalies.size()); }
  void push(EnkfStepResult step);
};

// Ensemble Kalman smoother: each assimilation at time k also updates the
// members at times max(0, k - lag) .. k-1 by regressing them on the
// observation-space anomalies of cycle k. lag = nullopt smooths over the full
// window; lag = 0 returns the filter analyses.
std::vector<Ensemble> enks(const EnkfRun& run, std::optional<int> lag = std::nullopt);

}  // namespace ssmcovest::filters
