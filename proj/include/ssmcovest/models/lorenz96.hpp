#pragma once

#include "ssmcovest/core/types.hpp"
#include "ssmcovest/models/state_space_model.hpp"

namespace ssmcovest::models {

struct Lorenz96Config {
  int n_vars = 8;
  double forcing = 8.0;
  double dt = 0.005;
  int steps_per_cycle = 10;

  // Throws InvalidArgument for n_vars < 4, dt <= 0 or steps_per_cycle < 1.
  void validate() const;

  double cycle_length() const { return dt * steps_per_cycle; }
};

// dX_n/dt = -X_{n-2} X_{n-1} + X_{n-1} X_{n+1} - X_n + F, periodic indices.
// Throws DimensionTooSmall for fewer than 4 variables.
Vector lorenz96_tendency(const Vector& x, double forcing);

// Classical fourth-order Runge-Kutta step for dx/dt = f(x).
template <class Tendency>
Vector rk4_step(Tendency&& f, const Vector& x, double dt) {
  const Vector k1 = f(x);
  const Vector k2 = f(Vector(x + 0.5 * dt * k1));
  const Vector k3 = f(Vector(x + 0.5 * dt * k2));
  const Vector k4 = f(Vector(x + dt * k3));
  return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// steps_per_cycle RK4 steps of length dt.
Vector lorenz96_propagate(const Vector& x, const Lorenz96Config& cfg);

// Deterministic spin-up onto the attractor: starts at F*1 with +0.01 on the
// first component and integrates the given number of assimilation cycles.
Vector lorenz96_spinup(const Lorenz96Config& cfg, int cycles);

// Lorenz-96 dynamics with the identity observation operator.
class Lorenz96Model final : public StateSpaceModel {
 public:
  explicit Lorenz96Model(Lorenz96Config cfg);

  int state_dim() const override { return cfg_.n_vars; }
  int obs_dim() const override { return cfg_.n_vars; }

  Vector propagate(const Vector& x) const override;
  Vector observe(const Vector& x) const override { return x; }
  Vector observe_adjoint(const Vector&, const Vector& v) const override { return v; }

  const Lorenz96Config& config() const { return cfg_; }

 private:
  Lorenz96Config cfg_;
};

}  // namespace ssmcovest::models
