#pragma once

#include <vector>

#include "ssmcovest/core/rng.hpp"
#include "ssmcovest/core/spd_matrix.hpp"
#include "ssmcovest/filters/ensemble.hpp"
#include "ssmcovest/models/state_space_model.hpp"

namespace ssmcovest::filters {

// Systematic resampling with a single uniform draw u ~ U[0, 1/N_p).
std::vector<int> systematic_resample(const Vector& weights, core::RngStream& rng);

// Same scan with the offset u in [0, 1/N_p) supplied by the caller.
std::vector<int> systematic_resample(const Vector& weights, double u);

struct SirStepResult {
  Ensemble weighted;           // particles x_k^(j) with likelihood weights, before resampling
  Matrix images;               // M(x_{k-1}^(i)) for every particle of the input ensemble
  double ess = 0.0;
  double log_evidence = 0.0;   // log of the mean likelihood of the forecast particles
};

// Resamples prev by its weights, propagates with N(0, q) noise and weights by
// the observation likelihood. Throws AllWeightsZero when every log-likelihood
// is -inf.
SirStepResult sir_assimilate(const Ensemble& prev, const Vector& y,
                             const models::StateSpaceModel& model, const core::SpdMatrix& q,
                             const core::SpdMatrix& r, core::RngStream& rng);

// One full SIR cycle: propagate, weight, resample. Output weights are 1/N_p.
Ensemble sir_step(const Ensemble& ens, const Vector& y, const models::StateSpaceModel& model,
                  const core::SpdMatrix& q, const core::SpdMatrix& r, core::RngStream& rng);

}  // namespace ssmcovest::filters
