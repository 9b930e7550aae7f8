#include "ssmcovest/filters/enkf.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "ssmcovest/core/gaussian.hpp"
#include "ssmcovest/errors.hpp"

namespace ssmcovest::filters {

EnkfStepResult enkf_assimilate(const Ensemble& prev, const Vector& y,
                               const models::StateSpaceModel& model, const core::SpdMatrix& q,
                               const core::SpdMatrix& r, core::RngStream& rng,
                               const EnkfOptions& opts) {
  prev.validate();
  const int n = prev.size();
  if (n < 2) throw InvalidArgument("enkf_assimilate: need at least 2 members");
  if (prev.dim() != model.state_dim() || q.dim() != model.state_dim() ||
      y.size() != model.obs_dim() || r.dim() != model.obs_dim()) {
    throw DimensionMismatch("enkf_assimilate: dimensions do not match the model");
  }
  if (!(opts.inflation > 0.0)) throw InvalidArgument("enkf_assimilate: inflation must be > 0");

  EnkfStepResult out;
  out.forecast = model.propagate_all(prev.particles) +
                 core::mvn_sample(Vector::Zero(model.state_dim()), q, rng, n);
  if (!out.forecast.allFinite()) throw NonFiniteState("enkf_assimilate: non-finite forecast");
  if (opts.inflation != 1.0) {
    const Vector mean = out.forecast.rowwise().mean();
    out.forecast = (opts.inflation * (out.forecast.colwise() - mean)).colwise() + mean;
  }

  const double denom = static_cast<double>(n - 1);
  const Vector x_mean = out.forecast.rowwise().mean();
  const Matrix x_anom = out.forecast.colwise() - x_mean;
  const Matrix hx = model.observe_all(out.forecast);
  const Vector hx_mean = hx.rowwise().mean();
  out.obs_anomalies = hx.colwise() - hx_mean;

  Matrix c_yy = out.obs_anomalies * out.obs_anomalies.transpose() / denom + r.values();
  c_yy = 0.5 * (c_yy + c_yy.transpose()).eval();
  Eigen::LLT<Matrix> llt(c_yy);
  if (llt.info() != Eigen::Success) {
    throw SingularInnovationCovariance("enkf_assimilate: innovation covariance is not PD");
  }

  const Matrix perturbations = core::mvn_sample(Vector::Zero(model.obs_dim()), r, rng, n);
  const Matrix innovations = (perturbations.colwise() + y) - hx;
  out.scaled_innovations = llt.solve(innovations);

  const Matrix c_xy = x_anom * out.obs_anomalies.transpose() / denom;
  out.analysis = Ensemble::uniform(out.forecast + c_xy * out.scaled_innovations, prev.cycle + 1);

  const Matrix l = llt.matrixL();
  const Vector white = l.triangularView<Eigen::Lower>().solve(Vector(y - hx_mean));
  out.log_evidence = -0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi) -
                     l.diagonal().array().log().sum() - 0.5 * white.squaredNorm();
  return out;
}

Ensemble enkf_step(const Ensemble& ens, const Vector& y, const models::StateSpaceModel& model,
                   const core::SpdMatrix& q, const core::SpdMatrix& r, core::RngStream& rng,
                   const EnkfOptions& opts) {
  return enkf_assimilate(ens, y, model, q, r, rng, opts).analysis;
}

void EnkfRun::push(EnkfStepResult step) {
  log_evidence += step.log_evidence;
  analyses.push_back(std::move(step.analysis));
  obs_anomalies.push_back(std::move(step.obs_anomalies));
  scaled_innovations.push_back(std::move(step.scaled_innovations));
}

std::vector<Ensemble> enks(const EnkfRun& run, std::optional<int> lag) {
  const int big_k = run.cycles();
  if (static_cast<int>(run.analyses.size()) != big_k + 1) {
    throw InvalidArgument("enks: run must hold K+1 analyses");
  }
  if (lag && *lag < 0) throw InvalidArgument("enks: lag must be >= 0");
  std::vector<Ensemble> smoothed = run.analyses;
  if (big_k == 0) return smoothed;
  const double denom = static_cast<double>(run.analyses.front().size() - 1);
  for (int k = 1; k <= big_k; ++k) {
    const Matrix& hy = run.obs_anomalies[static_cast<std::size_t>(k - 1)];
    const Matrix& d = run.scaled_innovations[static_cast<std::size_t>(k - 1)];
    const int first = lag ? std::max(0, k - *lag) : 0;
    for (int l = first; l < k; ++l) {
      Matrix& x = smoothed[static_cast<std::size_t>(l)].particles;
      const Vector mean = x.rowwise().mean();
      const Matrix anomalies = x.colwise() - mean;
      x += (anomalies * hy.transpose() / denom) * d;
    }
  }
  return smoothed;
}

}  // namespace ssmcovest::filters
