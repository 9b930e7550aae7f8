#include "ssmcovest/em/filter_run.hpp"

#include "ssmcovest/em/estimation_error.hpp"
#include "ssmcovest/filters/sir.hpp"

namespace ssmcovest::em {

namespace {

std::string describe(const std::string& reason, int s, int fp, int k) {
  std::string text = reason;
  if (s >= 0) text += " (em iteration " + std::to_string(s);
  if (fp >= 0) text += (s >= 0 ? ", " : " (") + std::string("fixed-point iteration ") + std::to_string(fp);
  if (k >= 0) text += (s >= 0 || fp >= 0 ? ", " : " (") + std::string("cycle ") + std::to_string(k);
  if (s >= 0 || fp >= 0 || k >= 0) text += ")";
  return text;
}

}  // namespace

EstimationError::EstimationError(const std::string& reason, int em_iteration, int fp_iteration,
                                 int cycle)
    : Error(describe(reason, em_iteration, fp_iteration, cycle)),
      reason_(reason),
      em_iteration_(em_iteration),
      fp_iteration_(fp_iteration),
      cycle_(cycle) {}

EstimationError EstimationError::located(int em_iteration, int fp_iteration) const {
  return EstimationError(reason_, em_iteration, fp_iteration, cycle_);
}

FilterRun run_particle_filter(const models::StateSpaceModel& model, const Matrix& observations,
                              const core::SpdMatrix& q, const core::SpdMatrix& r,
                              const filters::Ensemble& initial, const ParticleFilterOptions& opts,
                              const core::RngStream& rng) {
  initial.validate();
  if (observations.rows() != model.obs_dim()) {
    throw DimensionMismatch("run_particle_filter: observation dimension");
  }
  const int big_k = static_cast<int>(observations.cols());
  FilterRun run;
  run.ensembles.reserve(static_cast<std::size_t>(big_k + 1));
  run.images.reserve(static_cast<std::size_t>(big_k));
  run.diagnostics.reserve(static_cast<std::size_t>(big_k));
  run.ensembles.push_back(initial);
  run.ensembles.back().cycle = 0;

  for (int k = 1; k <= big_k; ++k) {
    core::RngStream cycle_rng = rng.split(static_cast<std::uint64_t>(k));
    const filters::Ensemble& prev = run.ensembles.back();
    const Vector y = observations.col(k - 1);
    CycleDiagnostics diag;
    diag.cycle = k;
    try {
      if (opts.kind == FilterKind::Sir) {
        filters::SirStepResult step = filters::sir_assimilate(prev, y, model, q, r, cycle_rng);
        diag.ess = step.ess;
        run.log_evidence += step.log_evidence;
        run.images.push_back(std::move(step.images));
        run.ensembles.push_back(std::move(step.weighted));
      } else {
        filters::VmpfStepResult step =
            filters::vmpf_assimilate(prev, y, model, q, r, opts.vmpf, cycle_rng);
        diag.ess = step.analysis.ess();
        diag.mean_update_norm = step.diagnostics.final_update_norm;
        diag.map_iterations = step.diagnostics.map_iterations;
        run.log_evidence += step.log_evidence;
        run.images.push_back(std::move(step.images));
        run.ensembles.push_back(std::move(step.analysis));
      }
    } catch (const AllWeightsZero& e) {
      throw EstimationError(e.what(), -1, -1, k);
    } catch (const NonFiniteState& e) {
      throw EstimationError(e.what(), -1, -1, k);
    }
    run.diagnostics.push_back(diag);
  }
  return run;
}

}  // namespace ssmcovest::em
