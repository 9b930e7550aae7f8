#pragma once

#include <vector>

#include "ssmcovest/core/rng.hpp"
#include "ssmcovest/core/spd_matrix.hpp"
#include "ssmcovest/filters/ensemble.hpp"
#include "ssmcovest/models/state_space_model.hpp"

namespace ssmcovest::filters {

enum class KernelBandwidthRule {
  // B = b * I with b from the median pairwise Euclidean distance.
  MedianHeuristic,
  // B = b * Q with b from the median pairwise Q-metric distance.
  ScaledIdentity,
};

struct VmpfOptions {
  double step_size = 0.05;
  int max_map_iterations = 100;
  double grad_norm_tolerance = 1e-3;
  KernelBandwidthRule bandwidth = KernelBandwidthRule::ScaledIdentity;
  // Multiplies the median-heuristic bandwidth.
  double bandwidth_factor = 1.0;
  // Steps are halved on non-finite or log-posterior-decreasing moves; the
  // mapping stops once the step would fall below this value.
  double min_step_size = 1e-4;
  // Factor applied to the step after every accepted move (1 keeps it fixed).
  double step_growth = 1.0;

  void validate() const;
};

// Posterior p(x | y_{1:k}) proportional to
//   N(y; H(x), R) * sum_i w_i N(x; M(x_{k-1}^(i)), Q),
// i.e. the Gaussian-mixture forecast density carried by the previous
// ensemble times the observation likelihood.
class MixturePosterior {
 public:
  MixturePosterior(Matrix images, Vector weights, core::SpdMatrix q, Vector y,
                   const models::StateSpaceModel& model, core::SpdMatrix r);

  // Normalized log densities of the two factors, summed.
  double log_density(const Vector& x) const;
  Vector gradient(const Vector& x) const;
  double value_and_gradient(const Vector& x, Vector& grad) const;

  // Mixture responsibilities of the forecast components at x (sum to 1).
  Vector responsibilities(const Vector& x) const;

  const core::SpdMatrix& q() const { return q_; }
  const core::SpdMatrix& r() const { return r_; }
  const Matrix& images() const { return images_; }

 private:
  Matrix images_;
  Matrix whitened_images_;
  Vector log_weights_;
  core::SpdMatrix q_;
  Vector y_;
  const models::StateSpaceModel* model_;
  core::SpdMatrix r_;
  double log_norm_q_;
  double log_norm_r_;
};

// Gradient of the log posterior at x with the mixture built from prev_ens:
//   H^T R^{-1} (y - H(x)) - Q^{-1} (x - sum_j beta_j M(x_{k-1}^(j))).
Vector vmpf_log_posterior_gradient(const Vector& x, const Ensemble& prev_ens, const Vector& y,
                                   const models::StateSpaceModel& model, const core::SpdMatrix& q,
                                   const core::SpdMatrix& r);

struct KernelValue {
  double value = 0.0;
  Vector gradient;  // with respect to x_src
};

// Gaussian kernel exp(-0.5 d^T B^{-1} d), d = x_src - x_dst.
KernelValue vmpf_kernel_and_grad(const Vector& x_src, const Vector& x_dst,
                                 const core::SpdMatrix& bandwidth);

struct VmpfDiagnostics {
  int map_iterations = 0;
  double final_update_norm = 0.0;
  double final_step_size = 0.0;
  double bandwidth_scale = 0.0;
};

// Moves the particles (columns) along the kernelized steepest-descent
// direction of the KL divergence to the posterior. When trace is non-null the
// mean log-posterior of the particle set is appended after every accepted
// iteration (the first entry is the starting value).
Matrix vmpf_transport(Matrix particles, const MixturePosterior& posterior,
                      const VmpfOptions& opts, VmpfDiagnostics* diagnostics = nullptr,
                      std::vector<double>* trace = nullptr);

struct VmpfStepResult {
  Ensemble analysis;  // uniform weights
  Matrix forecast;    // particles before the mapping
  Matrix images;      // M(x_{k-1}^(i))
  VmpfDiagnostics diagnostics;
  double log_evidence = 0.0;
};

// One VMPF cycle. Throws NonFiniteState if the particles cannot be kept finite.
VmpfStepResult vmpf_assimilate(const Ensemble& prev_ens, const Vector& y,
                               const models::StateSpaceModel& model, const core::SpdMatrix& q,
                               const core::SpdMatrix& r, const VmpfOptions& opts,
                               core::RngStream& rng);

}  // namespace ssmcovest::filters
