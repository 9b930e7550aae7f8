#include "ssmcovest/em/em_estimator.hpp"

#include <chrono>

#include "ssmcovest/core/matrix_metrics.hpp"
#include "ssmcovest/em/fixed_point.hpp"

namespace ssmcovest::em {

Matrix project_structure(const Matrix& q, QStructure structure) {
  if (q.rows() != q.cols()) throw DimensionMismatch("project_structure: matrix must be square");
  const Eigen::Index n = q.rows();
  if (structure == QStructure::Full) return q;
  Matrix out = Matrix::Zero(n, n);
  out.diagonal().setConstant(q.diagonal().mean());
  if (structure == QStructure::TridiagonalIsotropic && n > 1) {
    const double band =
        0.5 * (q.diagonal(1).mean() + q.diagonal(-1).mean());
    out.diagonal(1).setConstant(band);
    out.diagonal(-1).setConstant(band);
  }
  return out;
}

void EmOptions::validate() const {
  if (max_em_iterations < 0) throw InvalidArgument("EmOptions: max_em_iterations must be >= 0");
  if (max_fp_iterations < 1) throw InvalidArgument("EmOptions: max_fp_iterations must be >= 1");
  if (!(em_tolerance > 0.0) || !(fp_tolerance > 0.0)) {
    throw InvalidArgument("EmOptions: tolerances must be > 0");
  }
  filter.vmpf.validate();
}

EmTrace em_estimate_q(const models::StateSpaceModel& model, const Matrix& observations,
                      const core::SpdMatrix& q0, const core::SpdMatrix& r,
                      const filters::Ensemble& initial, const EmOptions& opts,
                      const core::RngStream& rng) {
  opts.validate();
  if (observations.cols() < 1) throw InvalidArgument("em_estimate_q: need K >= 1 observations");
  if (q0.dim() != model.state_dim()) throw DimensionMismatch("em_estimate_q: q0 dimension");

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  int s = 0;
  int fp = -1;
  auto run_filter = [&](const core::SpdMatrix& q) {
    try {
      return run_particle_filter(model, observations, q, r, initial, opts.filter, rng);
    } catch (const EstimationError& e) {
      throw e.located(s, fp);
    }
  };

  EmTrace trace;
  core::SpdMatrix q_em = q0;
  FilterRun estep = run_filter(q_em);
  trace.records.push_back(EmRecord{0, q_em, 0.0, 0, {}, elapsed(), estep.log_evidence});

  double stop_em = 2.0 * opts.em_tolerance;
  for (s = 1; s <= opts.max_em_iterations && stop_em > opts.em_tolerance; ++s) {
    EmRecord record{s, q_em, 0.0, 0, {}, 0.0, 0.0};
    FilterRun mstep = estep;
    core::SpdMatrix q_fp0 = q_em;
    core::SpdMatrix q_fp = q_em;
    double stop_fp = 2.0 * opts.fp_tolerance;
    for (fp = 1; fp <= opts.max_fp_iterations && stop_fp > opts.fp_tolerance; ++fp) {
      Matrix update;
      try {
        update = fixed_point_matrix(estep, mstep, q_fp0);
      } catch (const NonFiniteState& e) {
        throw EstimationError(e.what(), s, fp, -1);
      }
      update = project_structure(update, opts.structure);
      try {
        if (!update.allFinite()) throw NotPositiveDefinite("non-finite update");
        q_fp = core::SpdMatrix::from_matrix_with_retry(update);
      } catch (const NotPositiveDefinite& e) {
        throw DegenerateResiduals("em_estimate_q: fixed-point update is not positive definite at em iteration " +
                                  std::to_string(s) + ", fixed-point iteration " +
                                  std::to_string(fp) + ": " + e.what());
      }
      stop_fp = core::frobenius_rel_diff(q_fp.values(), q_fp0.values());
      record.fp_stops.push_back(stop_fp);
      mstep = run_filter(q_fp);
      q_fp0 = q_fp;
      ++record.fp_iterations;
    }
    fp = -1;
    stop_em = core::frobenius_rel_diff(q_em.values(), q_fp.values());
    q_em = q_fp;
    estep = std::move(mstep);

    record.q = q_em;
    record.stop_em = stop_em;
    record.log_evidence = estep.log_evidence;
    record.wallclock_s = elapsed();
    trace.records.push_back(std::move(record));
  }
  trace.final_diagnostics = estep.diagnostics;
  trace.final_means.resize(model.state_dim(), static_cast<Eigen::Index>(estep.ensembles.size()));
  for (std::size_t k = 0; k < estep.ensembles.size(); ++k) {
    trace.final_means.col(static_cast<Eigen::Index>(k)) = estep.ensembles[k].mean();
  }
  return trace;
}

}  // namespace ssmcovest::em
