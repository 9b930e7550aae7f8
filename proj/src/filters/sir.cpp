#include "ssmcovest/filters/sir.hpp"

#include <cmath>

#include "ssmcovest/core/gaussian.hpp"
#include "ssmcovest/errors.hpp"

namespace ssmcovest::filters {

std::vector<int> systematic_resample(const Vector& weights, double u) {
  const auto n = static_cast<int>(weights.size());
  if (n < 1) throw InvalidArgument("systematic_resample: empty weight vector");
  const double step = 1.0 / n;
  if (!(u >= 0.0 && u < step)) throw InvalidArgument("systematic_resample: offset outside [0, 1/N)");

  int last_positive = n - 1;
  while (last_positive > 0 && !(weights(last_positive) > 0.0)) --last_positive;

  std::vector<int> ancestors(static_cast<std::size_t>(n));
  double cumulative = weights(0);
  int i = 0;
  for (int j = 0; j < n; ++j) {
    const double position = u + j * step;
    while (position >= cumulative && i < last_positive) {
      ++i;
      cumulative += weights(i);
    }
    ancestors[static_cast<std::size_t>(j)] = i;
  }
  return ancestors;
}

std::vector<int> systematic_resample(const Vector& weights, core::RngStream& rng) {
  const double u = rng.uniform() / static_cast<double>(weights.size());
  return systematic_resample(weights, u);
}

SirStepResult sir_assimilate(const Ensemble& prev, const Vector& y,
                             const models::StateSpaceModel& model, const core::SpdMatrix& q,
                             const core::SpdMatrix& r, core::RngStream& rng) {
  prev.validate();
  if (prev.dim() != model.state_dim() || q.dim() != model.state_dim() ||
      y.size() != model.obs_dim() || r.dim() != model.obs_dim()) {
    throw DimensionMismatch("sir_assimilate: dimensions do not match the model");
  }
  const int n = prev.size();

  SirStepResult out;
  out.images = model.propagate_all(prev.particles);
  const std::vector<int> ancestors = systematic_resample(prev.weights, rng);
  const Matrix noise = core::mvn_sample(Vector::Zero(model.state_dim()), q, rng, n);

  Matrix particles(model.state_dim(), n);
  Vector log_weights(n);
  for (int j = 0; j < n; ++j) {
    particles.col(j) = out.images.col(ancestors[static_cast<std::size_t>(j)]) + noise.col(j);
    log_weights(j) = core::gaussian_logpdf(y, model.observe(particles.col(j)), r);
  }
  const double log_total = core::normalize_log_weights(log_weights);
  if (!std::isfinite(log_total)) {
    throw AllWeightsZero("sir_assimilate: every particle has zero likelihood");
  }
  out.log_evidence = log_total - std::log(static_cast<double>(n));
  out.weighted = Ensemble{std::move(particles), std::move(log_weights), prev.cycle + 1};
  out.ess = out.weighted.ess();
  return out;
}

Ensemble sir_step(const Ensemble& ens, const Vector& y, const models::StateSpaceModel& model,
                  const core::SpdMatrix& q, const core::SpdMatrix& r, core::RngStream& rng) {
  SirStepResult step = sir_assimilate(ens, y, model, q, r, rng);
  const std::vector<int> ancestors = systematic_resample(step.weighted.weights, rng);
  Matrix resampled(step.weighted.dim(), step.weighted.size());
  for (int j = 0; j < step.weighted.size(); ++j) {
    resampled.col(j) = step.weighted.particles.col(ancestors[static_cast<std::size_t>(j)]);
  }
  return Ensemble::uniform(std::move(resampled), step.weighted.cycle);
}

}  // namespace ssmcovest::filters
