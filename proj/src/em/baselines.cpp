#include "ssmcovest/em/baselines.hpp"

#include <chrono>

#include "ssmcovest/core/matrix_metrics.hpp"

namespace ssmcovest::em {

namespace {

core::SpdMatrix validated(const Matrix& m, const char* who) {
  if (!m.allFinite()) throw DegenerateResiduals(std::string(who) + ": non-finite update");
  try {
    return core::SpdMatrix::from_matrix_with_retry(m);
  } catch (const NotPositiveDefinite& e) {
    throw DegenerateResiduals(std::string(who) + ": " + e.what());
  }
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace

Matrix shumway_stoffer_q_update(const filters::SmootherResult& smoothed,
                                const filters::GaussianStateSpace& gss) {
  const std::size_t big_k = smoothed.means.size() - 1;
  if (big_k < 1) throw InvalidArgument("shumway_stoffer_q_update: need K >= 1");
  const Matrix& a = gss.transition;
  Matrix acc = Matrix::Zero(a.rows(), a.rows());
  for (std::size_t k = 1; k <= big_k; ++k) {
    const Vector e = smoothed.means[k] - a * smoothed.means[k - 1];
    const Matrix cross = a * smoothed.lag_one[k].transpose();
    acc += e * e.transpose() + smoothed.covs[k] - cross - cross.transpose() +
           a * smoothed.covs[k - 1] * a.transpose();
  }
  acc /= static_cast<double>(big_k);
  return 0.5 * (acc + acc.transpose());
}

double incomplete_loglik_linear(const filters::GaussianStateSpace& gss, const Matrix& observations,
                                const core::SpdMatrix& q) {
  return filters::kalman_filter(gss.with_q(q), observations).loglik;
}

EmTrace em_kf_ks(const filters::GaussianStateSpace& gss, const Matrix& observations,
                 const core::SpdMatrix& q0, const EmOptions& opts) {
  opts.validate();
  const Stopwatch clock;
  EmTrace trace;
  core::SpdMatrix q = q0;
  filters::KalmanPass pass = filters::kalman_filter(gss.with_q(q), observations);
  trace.records.push_back(EmRecord{0, q, 0.0, 0, {}, clock.seconds(), pass.loglik});

  double stop = 2.0 * opts.em_tolerance;
  for (int s = 1; s <= opts.max_em_iterations && stop > opts.em_tolerance; ++s) {
    const filters::GaussianStateSpace current = gss.with_q(q);
    const filters::SmootherResult smoothed = filters::rts_smoother(pass, current);
    core::SpdMatrix q_new = validated(
        project_structure(shumway_stoffer_q_update(smoothed, current), opts.structure), "em_kf_ks");
    stop = core::frobenius_rel_diff(q.values(), q_new.values());
    q = std::move(q_new);
    pass = filters::kalman_filter(gss.with_q(q), observations);
    trace.records.push_back(EmRecord{s, q, stop, 0, {}, clock.seconds(), pass.loglik});
  }
  return trace;
}

filters::EnkfRun run_enkf(const models::StateSpaceModel& model, const Matrix& observations,
                          const core::SpdMatrix& q, const core::SpdMatrix& r,
                          const filters::Ensemble& initial, const filters::EnkfOptions& opts,
                          const core::RngStream& rng) {
  initial.validate();
  filters::EnkfRun run;
  run.analyses.push_back(initial);
  run.analyses.back().cycle = 0;
  for (Eigen::Index k = 1; k <= observations.cols(); ++k) {
    core::RngStream cycle_rng = rng.split(static_cast<std::uint64_t>(k));
    run.push(filters::enkf_assimilate(run.analyses.back(), observations.col(k - 1), model, q, r,
                                      cycle_rng, opts));
  }
  return run;
}

Matrix ensemble_residual_covariance(const std::vector<filters::Ensemble>& smoothed,
                                    const models::StateSpaceModel& model) {
  if (smoothed.size() < 2) throw InvalidArgument("ensemble_residual_covariance: need K >= 1");
  const Eigen::Index n_x = smoothed.front().dim();
  Matrix acc = Matrix::Zero(n_x, n_x);
  double count = 0.0;
  for (std::size_t k = 1; k < smoothed.size(); ++k) {
    const Matrix residual =
        smoothed[k].particles - model.propagate_all(smoothed[k - 1].particles);
    acc += residual * residual.transpose();
    count += static_cast<double>(residual.cols());
  }
  acc /= count;
  return 0.5 * (acc + acc.transpose());
}

EmTrace em_enkf_enks(const models::StateSpaceModel& model, const Matrix& observations,
                     const core::SpdMatrix& q0, const core::SpdMatrix& r,
                     const filters::Ensemble& initial, const EmOptions& opts,
                     const core::RngStream& rng, const EnsembleSmootherOptions& smoother) {
  opts.validate();
  if (initial.size() < 2) throw InvalidArgument("em_enkf_enks: need at least 2 members");
  const Stopwatch clock;
  EmTrace trace;
  core::SpdMatrix q = q0;
  filters::EnkfRun run = run_enkf(model, observations, q, r, initial, smoother.enkf, rng);
  trace.records.push_back(EmRecord{0, q, 0.0, 0, {}, clock.seconds(), run.log_evidence});

  double stop = 2.0 * opts.em_tolerance;
  for (int s = 1; s <= opts.max_em_iterations && stop > opts.em_tolerance; ++s) {
    const std::vector<filters::Ensemble> smoothed = filters::enks(run, smoother.lag);
    core::SpdMatrix q_new = validated(
        project_structure(ensemble_residual_covariance(smoothed, model), opts.structure),
        "em_enkf_enks");
    stop = core::frobenius_rel_diff(q.values(), q_new.values());
    q = std::move(q_new);
    run = run_enkf(model, observations, q, r, initial, smoother.enkf, rng);
    trace.records.push_back(EmRecord{s, q, stop, 0, {}, clock.seconds(), run.log_evidence});
  }
  return trace;
}

}  // namespace ssmcovest::em
