#include "ssmcovest/filters/vmpf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "ssmcovest/core/gaussian.hpp"
#include "ssmcovest/errors.hpp"
#include "ssmcovest/filters/sir.hpp"

namespace ssmcovest::filters {

namespace {

double log_normalizer(const core::SpdMatrix& cov) {
  return -0.5 * cov.dim() * std::log(2.0 * std::numbers::pi) - 0.5 * cov.log_det();
}

double mean_of(const Vector& v) { return v.mean(); }

// Median of the pairwise distances between columns (N_p >= 2).
double median_pairwise_distance(const Matrix& squared_distances) {
  const Eigen::Index n = squared_distances.rows();
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index l = j + 1; l < n; ++l) d.push_back(std::sqrt(squared_distances(l, j)));
  }
  std::sort(d.begin(), d.end());
  const std::size_t m = d.size();
  return m % 2 == 1 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

Matrix pairwise_squared_distances(const Matrix& points) {
  const Eigen::Index n = points.cols();
  const Vector norms = points.colwise().squaredNorm().transpose();
  Matrix d2 = -2.0 * points.transpose() * points;
  d2.colwise() += norms;
  d2.rowwise() += norms.transpose();
  for (Eigen::Index j = 0; j < n; ++j) {
    d2(j, j) = 0.0;
    for (Eigen::Index l = 0; l < n; ++l) d2(l, j) = std::max(d2(l, j), 0.0);
  }
  return d2;
}

struct FlowEvaluation {
  Vector log_density;  // per particle
  Matrix gradients;    // N_x x N_p
  bool finite = true;
};

FlowEvaluation evaluate(const Matrix& particles, const MixturePosterior& posterior) {
  FlowEvaluation eval;
  const Eigen::Index n = particles.cols();
  eval.log_density.resize(n);
  eval.gradients.resize(particles.rows(), n);
  Vector grad;
  for (Eigen::Index j = 0; j < n; ++j) {
    eval.log_density(j) = posterior.value_and_gradient(particles.col(j), grad);
    eval.gradients.col(j) = grad;
  }
  eval.finite = particles.allFinite() && eval.log_density.allFinite() && eval.gradients.allFinite();
  return eval;
}

}  // namespace

void VmpfOptions::validate() const {
  if (!(step_size > 0.0)) throw InvalidArgument("VmpfOptions: step size must be > 0");
  if (max_map_iterations < 0) throw InvalidArgument("VmpfOptions: max_map_iterations must be >= 0");
  if (!(grad_norm_tolerance > 0.0)) throw InvalidArgument("VmpfOptions: tolerance must be > 0");
  if (!(min_step_size > 0.0)) throw InvalidArgument("VmpfOptions: min step size must be > 0");
  if (!(step_growth >= 1.0)) throw InvalidArgument("VmpfOptions: step growth must be >= 1");
  if (!(bandwidth_factor > 0.0) || !std::isfinite(bandwidth_factor)) {
    throw InvalidArgument("VmpfOptions: bandwidth factor must be > 0");
  }
}

MixturePosterior::MixturePosterior(Matrix images, Vector weights, core::SpdMatrix q, Vector y,
                                   const models::StateSpaceModel& model, core::SpdMatrix r)
    : images_(std::move(images)),
      q_(std::move(q)),
      y_(std::move(y)),
      model_(&model),
      r_(std::move(r)) {
  if (images_.rows() != model.state_dim() || q_.dim() != model.state_dim() ||
      y_.size() != model.obs_dim() || r_.dim() != model.obs_dim()) {
    throw DimensionMismatch("MixturePosterior: dimensions do not match the model");
  }
  if (weights.size() != images_.cols() || images_.cols() < 1) {
    throw DimensionMismatch("MixturePosterior: need one weight per mixture component");
  }
  log_weights_ = weights.array().log().matrix();
  whitened_images_ = q_.whiten(images_);
  log_norm_q_ = log_normalizer(q_);
  log_norm_r_ = log_normalizer(r_);
}

double MixturePosterior::value_and_gradient(const Vector& x, Vector& grad) const {
  const Vector z = q_.whiten(x);
  const Eigen::Index n = whitened_images_.cols();
  Vector log_terms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    log_terms(i) = log_weights_(i) - 0.5 * (z - whitened_images_.col(i)).squaredNorm();
  }
  const double lse = core::log_sum_exp({log_terms.data(), static_cast<std::size_t>(n)});
  const Vector beta = (log_terms.array() - lse).exp().matrix();

  const Vector residual = y_ - model_->observe(x);
  const Vector r_inv_residual = r_.solve(residual);

  grad = model_->observe_adjoint(x, r_inv_residual) - q_.whiten_adjoint(z - whitened_images_ * beta);
  return log_norm_q_ + lse + log_norm_r_ - 0.5 * residual.dot(r_inv_residual);
}

double MixturePosterior::log_density(const Vector& x) const {
  Vector grad;
  return value_and_gradient(x, grad);
}

Vector MixturePosterior::gradient(const Vector& x) const {
  Vector grad;
  value_and_gradient(x, grad);
  return grad;
}

Vector MixturePosterior::responsibilities(const Vector& x) const {
  const Vector z = q_.whiten(x);
  const Eigen::Index n = whitened_images_.cols();
  Vector log_terms(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    log_terms(i) = log_weights_(i) - 0.5 * (z - whitened_images_.col(i)).squaredNorm();
  }
  core::normalize_log_weights(log_terms);
  return log_terms;
}

Vector vmpf_log_posterior_gradient(const Vector& x, const Ensemble& prev_ens, const Vector& y,
                                   const models::StateSpaceModel& model, const core::SpdMatrix& q,
                                   const core::SpdMatrix& r) {
  prev_ens.validate();
  MixturePosterior posterior(model.propagate_all(prev_ens.particles), prev_ens.weights, q, y,
                             model, r);
  return posterior.gradient(x);
}

KernelValue vmpf_kernel_and_grad(const Vector& x_src, const Vector& x_dst,
                                 const core::SpdMatrix& bandwidth) {
  if (x_src.size() != x_dst.size() || x_src.size() != bandwidth.dim()) {
    throw DimensionMismatch("vmpf_kernel_and_grad: dimension mismatch");
  }
  const Vector d = x_src - x_dst;
  const Vector b_inv_d = bandwidth.solve(d);
  KernelValue out;
  out.value = std::exp(-0.5 * d.dot(b_inv_d));
  out.gradient = -out.value * b_inv_d;
  return out;
}

Matrix vmpf_transport(Matrix particles, const MixturePosterior& posterior,
                      const VmpfOptions& opts, VmpfDiagnostics* diagnostics,
                      std::vector<double>* trace) {
  opts.validate();
  const Eigen::Index n = particles.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool q_metric = opts.bandwidth == KernelBandwidthRule::ScaledIdentity;

  FlowEvaluation current = evaluate(particles, posterior);
  if (!current.finite) throw NonFiniteState("vmpf_transport: non-finite starting particles");
  double current_mean = mean_of(current.log_density);
  if (trace) trace->push_back(current_mean);

  VmpfDiagnostics diag;
  double step = opts.step_size;
  for (int iter = 0; iter < opts.max_map_iterations; ++iter) {
    const Matrix metric_points = q_metric ? posterior.q().whiten(particles) : particles;
    const Matrix d2 = pairwise_squared_distances(metric_points);
    double scale = 1.0;
    if (n >= 2) {
      const double med = median_pairwise_distance(d2);
      if (med > 0.0) scale = med * med / (2.0 * std::log(static_cast<double>(n)));
    }
    scale *= opts.bandwidth_factor;
    diag.bandwidth_scale = scale;
    const Matrix kernel = (-0.5 / scale * d2).array().exp().matrix();

    // Attraction: sum_l K_lj grad_l. Repulsion: sum_l grad_{x_l} K(x_l, x_j)
    // = -(1/b) P sum_l K_lj (x_l - x_j), with P = Q^{-1} or I.
    Matrix spread = particles * kernel;
    spread -= particles * kernel.colwise().sum().asDiagonal();
    if (q_metric) spread = posterior.q().solve(spread);
    const Matrix velocity = inv_n * (current.gradients * kernel - spread / scale);

    bool accepted = false;
    while (step >= opts.min_step_size) {
      Matrix moved = particles + step * velocity;
      FlowEvaluation next = evaluate(moved, posterior);
      if (next.finite) {
        const double next_mean = mean_of(next.log_density);
        if (next_mean >= current_mean) {
          particles = std::move(moved);
          current = std::move(next);
          current_mean = next_mean;
          accepted = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!accepted) break;
    ++diag.map_iterations;
    diag.final_update_norm = step * velocity.colwise().norm().mean();
    step *= opts.step_growth;
    if (trace) trace->push_back(current_mean);
    if (diag.final_update_norm < opts.grad_norm_tolerance) break;
  }
  diag.final_step_size = step;
  if (diagnostics) *diagnostics = diag;
  return particles;
}

VmpfStepResult vmpf_assimilate(const Ensemble& prev_ens, const Vector& y,
                               const models::StateSpaceModel& model, const core::SpdMatrix& q,
                               const core::SpdMatrix& r, const VmpfOptions& opts,
                               core::RngStream& rng) {
  prev_ens.validate();
  if (prev_ens.dim() != model.state_dim() || q.dim() != model.state_dim() ||
      y.size() != model.obs_dim() || r.dim() != model.obs_dim()) {
    throw DimensionMismatch("vmpf_assimilate: dimensions do not match the model");
  }
  const int n = prev_ens.size();

  VmpfStepResult out;
  out.images = model.propagate_all(prev_ens.particles);
  const bool uniform = (prev_ens.weights.array() == prev_ens.weights(0)).all();
  const Matrix noise_free = [&] {
    if (uniform) return out.images;
    const std::vector<int> ancestors = systematic_resample(prev_ens.weights, rng);
    Matrix picked(out.images.rows(), n);
    for (int j = 0; j < n; ++j) picked.col(j) = out.images.col(ancestors[static_cast<std::size_t>(j)]);
    return picked;
  }();
  out.forecast = noise_free + core::mvn_sample(Vector::Zero(model.state_dim()), q, rng, n);
  if (!out.forecast.allFinite()) throw NonFiniteState("vmpf_assimilate: non-finite forecast");

  Vector log_lik(n);
  for (int j = 0; j < n; ++j) {
    log_lik(j) = core::gaussian_logpdf(y, model.observe(out.forecast.col(j)), r);
  }
  out.log_evidence = core::log_sum_exp({log_lik.data(), static_cast<std::size_t>(n)}) -
                     std::log(static_cast<double>(n));

  MixturePosterior posterior(out.images, prev_ens.weights, q, y, model, r);
  Matrix mapped = vmpf_transport(out.forecast, posterior, opts, &out.diagnostics);
  out.analysis = Ensemble::uniform(std::move(mapped), prev_ens.cycle + 1);
  return out;
}

}  // namespace ssmcovest::filters
