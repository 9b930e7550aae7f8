#pragma once

#include "ssmcovest/core/types.hpp"

namespace ssmcovest::models {

// Deterministic parts of x_k = M(x_{k-1}) + beta_k, y_k = H(x_k) + eps_k.
// All stochasticity is additive noise applied by callers.
class StateSpaceModel {
 public:
  virtual ~StateSpaceModel() = default;

  virtual int state_dim() const = 0;
  virtual int obs_dim() const = 0;

  // Advances a state by one assimilation interval.
  virtual Vector propagate(const Vector& x) const = 0;

  virtual Vector observe(const Vector& x) const = 0;

  // Applies the transposed observation Jacobian at x to an observation-space vector.
  virtual Vector observe_adjoint(const Vector& x, const Vector& v) const = 0;

  // Column-wise propagate / observe.
  Matrix propagate_all(const Matrix& states) const;
  Matrix observe_all(const Matrix& states) const;
};

// x -> A x, y = H x.
class LinearModel final : public StateSpaceModel {
 public:
  LinearModel(Matrix transition, Matrix observation);

  int state_dim() const override { return static_cast<int>(transition_.rows()); }
  int obs_dim() const override { return static_cast<int>(observation_.rows()); }

  Vector propagate(const Vector& x) const override;
  Vector observe(const Vector& x) const override;
  Vector observe_adjoint(const Vector& x, const Vector& v) const override;

  const Matrix& transition() const { return transition_; }
  const Matrix& observation() const { return observation_; }

 private:
  Matrix transition_;
  Matrix observation_;
};

struct Ar1Config {
  double coefficient = 0.8;
};

// nu * x
double ar1_step(double x, double nu);

// Scalar AR(1) dynamics observed directly.
LinearModel make_ar1_model(const Ar1Config& cfg);

}  // namespace ssmcovest::models
