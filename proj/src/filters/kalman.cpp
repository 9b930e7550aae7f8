#include "ssmcovest/filters/kalman.hpp"

#include <cmath>
#include <numbers>

#include "ssmcovest/errors.hpp"

namespace ssmcovest::filters {

GaussianStateSpace GaussianStateSpace::with_q(core::SpdMatrix new_q) const {
  GaussianStateSpace copy = *this;
  copy.q = std::move(new_q);
  return copy;
}

void GaussianStateSpace::validate() const {
  const auto n = transition.rows();
  if (transition.cols() != n || n == 0) throw DimensionMismatch("GaussianStateSpace: A must be square");
  if (observation.cols() != n || observation.rows() == 0) {
    throw DimensionMismatch("GaussianStateSpace: H must be M x N_x");
  }
  if (q.dim() != n || initial_mean.size() != n || initial_cov.dim() != n) {
    throw DimensionMismatch("GaussianStateSpace: Q / initial moments must be N_x dimensional");
  }
  if (r.dim() != observation.rows()) throw DimensionMismatch("GaussianStateSpace: R must be M x M");
}

KalmanStep kf_step(const Vector& mean, const Matrix& cov, const Vector& y,
                   const GaussianStateSpace& gss) {
  const Matrix& a = gss.transition;
  const Matrix& h = gss.observation;
  if (mean.size() != a.cols() || cov.rows() != a.cols() || y.size() != h.rows()) {
    throw DimensionMismatch("kf_step: dimension mismatch");
  }
  KalmanStep step;
  step.forecast_mean = a * mean;
  step.forecast_cov = a * cov * a.transpose() + gss.q.values();
  step.forecast_cov = 0.5 * (step.forecast_cov + step.forecast_cov.transpose()).eval();

  const Vector innovation = y - h * step.forecast_mean;
  Matrix s = h * step.forecast_cov * h.transpose() + gss.r.values();
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success) {
    throw SingularInnovationCovariance("kf_step: innovation covariance is not positive definite");
  }
  const Matrix ph = step.forecast_cov * h.transpose();
  const Matrix gain = llt.solve(ph.transpose()).transpose();

  step.mean = step.forecast_mean + gain * innovation;
  // Joseph form keeps the covariance symmetric and PD.
  const Matrix i_kh = Matrix::Identity(a.rows(), a.rows()) - gain * h;
  step.cov = i_kh * step.forecast_cov * i_kh.transpose() + gain * gss.r.values() * gain.transpose();
  step.cov = 0.5 * (step.cov + step.cov.transpose()).eval();

  const Matrix l = llt.matrixL();
  const double log_det = 2.0 * l.diagonal().array().log().sum();
  const Vector white = l.triangularView<Eigen::Lower>().solve(innovation);
  step.loglik_increment = -0.5 * static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi) -
                          0.5 * log_det - 0.5 * white.squaredNorm();
  return step;
}

KalmanPass kalman_filter(const GaussianStateSpace& gss, const Matrix& observations) {
  gss.validate();
  if (observations.rows() != gss.obs_dim()) throw DimensionMismatch("kalman_filter: observation dim");
  KalmanPass pass;
  pass.initial_mean = gss.initial_mean;
  pass.initial_cov = gss.initial_cov.values();
  pass.steps.reserve(static_cast<std::size_t>(observations.cols()));
  Vector mean = pass.initial_mean;
  Matrix cov = pass.initial_cov;
  for (Eigen::Index k = 0; k < observations.cols(); ++k) {
    KalmanStep step = kf_step(mean, cov, observations.col(k), gss);
    pass.loglik += step.loglik_increment;
    mean = step.mean;
    cov = step.cov;
    pass.steps.push_back(std::move(step));
  }
  return pass;
}

SmootherResult rts_smoother(const KalmanPass& pass, const GaussianStateSpace& gss) {
  const std::size_t big_k = pass.steps.size();
  SmootherResult out;
  out.means.resize(big_k + 1);
  out.covs.resize(big_k + 1);
  out.lag_one.resize(big_k + 1);

  auto filtered_mean = [&](std::size_t k) -> const Vector& {
    return k == 0 ? pass.initial_mean : pass.steps[k - 1].mean;
  };
  auto filtered_cov = [&](std::size_t k) -> const Matrix& {
    return k == 0 ? pass.initial_cov : pass.steps[k - 1].cov;
  };

  out.means[big_k] = filtered_mean(big_k);
  out.covs[big_k] = filtered_cov(big_k);
  const Matrix& a = gss.transition;
  for (std::size_t k = big_k; k-- > 0;) {
    const KalmanStep& next = pass.steps[k];  // forecast of x_{k+1}
    Eigen::LDLT<Matrix> forecast(next.forecast_cov);
    // J_k = P_{k|k} A^T P_{k+1|k}^{-1}
    const Matrix gain = forecast.solve(a * filtered_cov(k)).transpose();
    out.means[k] = filtered_mean(k) + gain * (out.means[k + 1] - next.forecast_mean);
    Matrix cov = filtered_cov(k) + gain * (out.covs[k + 1] - next.forecast_cov) * gain.transpose();
    out.covs[k] = 0.5 * (cov + cov.transpose());
    out.lag_one[k + 1] = out.covs[k + 1] * gain.transpose();
  }
  return out;
}

}  // namespace ssmcovest::filters
