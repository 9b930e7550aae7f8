#pragma once

#include <vector>

#include "ssmcovest/core/rng.hpp"
#include "ssmcovest/core/spd_matrix.hpp"
#include "ssmcovest/em/estimation_error.hpp"
#include "ssmcovest/em/filter_run.hpp"
#include "ssmcovest/filters/ensemble.hpp"
#include "ssmcovest/models/state_space_model.hpp"

namespace ssmcovest::em {

enum class QStructure { Full, DiagonalIsotropic, TridiagonalIsotropic };

// Replaces every constrained band by its average: the diagonal for
// DiagonalIsotropic (off-diagonals set to 0), diagonal and first
// sub/super-diagonal for TridiagonalIsotropic (the rest set to 0).
Matrix project_structure(const Matrix& q, QStructure structure);

struct EmOptions {
  int max_em_iterations = 25;
  double em_tolerance = 1e-3;
  int max_fp_iterations = 6;
  double fp_tolerance = 1e-3;
  ParticleFilterOptions filter;
  QStructure structure = QStructure::Full;

  void validate() const;
};

struct EmRecord {
  int iteration = 0;                // s; 0 holds Q_0
  core::SpdMatrix q;
  double stop_em = 0.0;             // 0 for s = 0
  int fp_iterations = 0;
  std::vector<double> fp_stops;
  double wallclock_s = 0.0;         // since the start of the estimation
  double log_evidence = 0.0;        // filter log evidence under q

  double stop_fp_last() const { return fp_stops.empty() ? 0.0 : fp_stops.back(); }
};

struct EmTrace {
  std::vector<EmRecord> records;
  // Filter pass under the final estimate: per-cycle diagnostics and the
  // weighted ensemble means (N_x x (K+1)).
  std::vector<CycleDiagnostics> final_diagnostics;
  Matrix final_means;

  const EmRecord& final_record() const { return records.back(); }
  int em_iterations() const { return static_cast<int>(records.size()) - 1; }
};

// Expectation-maximization over Q with a particle filter E-step and a
// fixed-point M-step. Every filter pass uses rng, so PF(Q) is a function of Q
// and the last fixed-point pass doubles as the next E-step.
// Filter divergence surfaces as EstimationError located by (s, fp, k).
EmTrace em_estimate_q(const models::StateSpaceModel& model, const Matrix& observations,
                      const core::SpdMatrix& q0, const core::SpdMatrix& r,
                      const filters::Ensemble& initial, const EmOptions& opts,
                      const core::RngStream& rng);

}  // namespace ssmcovest::em
