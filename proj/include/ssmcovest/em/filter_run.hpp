#pragma once

#include <vector>

#include "ssmcovest/core/rng.hpp"
#include "ssmcovest/core/spd_matrix.hpp"
#include "ssmcovest/filters/ensemble.hpp"
#include "ssmcovest/filters/vmpf.hpp"
#include "ssmcovest/models/state_space_model.hpp"

namespace ssmcovest::em {

enum class FilterKind { Vmpf, Sir };

struct ParticleFilterOptions {
  FilterKind kind = FilterKind::Vmpf;
  filters::VmpfOptions vmpf;
};

struct CycleDiagnostics {
  int cycle = 0;
  double ess = 0.0;
  double mean_update_norm = 0.0;
  int map_iterations = 0;
};

// Particle filter output over a batch of K cycles.
//   ensembles[k], k = 0..K: the initial ensemble and the ensembles x_k^(j)
//     with weights w_k^(j). For SIR these are the weighted sets before
//     resampling; VMPF weights are uniform.
//   images[k-1], k = 1..K: M(x_{k-1}^(i)) for every particle of ensembles[k-1].
struct FilterRun {
  std::vector<filters::Ensemble> ensembles;
  std::vector<Matrix> images;
  std::vector<CycleDiagnostics> diagnostics;
  double log_evidence = 0.0;

  int cycles() const { return static_cast<int>(images.size()); }
  int particles() const { return ensembles.empty() ? 0 : ensembles.front().size(); }
};

// Runs the filter over all columns of observations. Cycle k draws from
// rng.split(k), so two runs with the same stream see the same random numbers
// and the result is a deterministic function of q.
// Filter divergence is rethrown as EstimationError carrying the cycle.
FilterRun run_particle_filter(const models::StateSpaceModel& model, const Matrix& observations,
                              const core::SpdMatrix& q, const core::SpdMatrix& r,
                              const filters::Ensemble& initial, const ParticleFilterOptions& opts,
                              const core::RngStream& rng);

}  // namespace ssmcovest::em
