#include "ssmcovest/models/lorenz96.hpp"

#include <string>

#include "ssmcovest/errors.hpp"

namespace ssmcovest::models {

namespace {

// out = tendency(x); x and out must not alias.
void tendency_into(const Vector& x, double forcing, Vector& out) {
  const Eigen::Index n = x.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    const double xm2 = x((i + n - 2) % n);
    const double xm1 = x((i + n - 1) % n);
    const double xp1 = x((i + 1) % n);
    out(i) = (xp1 - xm2) * xm1 - x(i) + forcing;
  }
}

}  // namespace

void Lorenz96Config::validate() const {
  if (n_vars < 4) {
    throw InvalidArgument("Lorenz96Config: n_vars must be >= 4, got " + std::to_string(n_vars));
  }
  if (!(dt > 0.0)) throw InvalidArgument("Lorenz96Config: dt must be > 0");
  if (steps_per_cycle < 1) throw InvalidArgument("Lorenz96Config: steps_per_cycle must be >= 1");
}

Vector lorenz96_tendency(const Vector& x, double forcing) {
  if (x.size() < 4) {
    throw DimensionTooSmall("lorenz96_tendency: need at least 4 variables, got " +
                            std::to_string(x.size()));
  }
  Vector out(x.size());
  tendency_into(x, forcing, out);
  return out;
}

Vector lorenz96_propagate(const Vector& x, const Lorenz96Config& cfg) {
  if (x.size() != cfg.n_vars) throw DimensionMismatch("lorenz96_propagate: state size != n_vars");
  if (x.size() < 4) throw DimensionTooSmall("lorenz96_propagate: need at least 4 variables");
  const Eigen::Index n = x.size();
  const double dt = cfg.dt;
  Vector state = x;
  Vector k1(n), k2(n), k3(n), k4(n), stage(n);
  for (int step = 0; step < cfg.steps_per_cycle; ++step) {
    tendency_into(state, cfg.forcing, k1);
    stage = state + 0.5 * dt * k1;
    tendency_into(stage, cfg.forcing, k2);
    stage = state + 0.5 * dt * k2;
    tendency_into(stage, cfg.forcing, k3);
    stage = state + dt * k3;
    tendency_into(stage, cfg.forcing, k4);
    state += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return state;
}

Vector lorenz96_spinup(const Lorenz96Config& cfg, int cycles) {
  cfg.validate();
  Vector x = Vector::Constant(cfg.n_vars, cfg.forcing);
  x(0) += 0.01;
  for (int c = 0; c < cycles; ++c) x = lorenz96_propagate(x, cfg);
  return x;
}

Lorenz96Model::Lorenz96Model(Lorenz96Config cfg) : cfg_(cfg) { cfg_.validate(); }

Vector Lorenz96Model::propagate(const Vector& x) const { return lorenz96_propagate(x, cfg_); }

}  // namespace ssmcovest::models
