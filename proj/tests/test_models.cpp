#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "ssmcovest/errors.hpp"
#include "ssmcovest/models/lorenz96.hpp"
#include "ssmcovest/models/state_space_model.hpp"
#include "ssmcovest/models/twin.hpp"

using namespace ssmcovest;
using core::RngStream;
using core::SpdMatrix;

namespace {

Vector random_vector(int n, RngStream& rng, double scale = 1.0) {
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = scale * rng.normal();
  return v;
}

Vector rotate(const Vector& x) {
  const Eigen::Index n = x.size();
  Vector out(n);
  for (Eigen::Index i = 0; i < n; ++i) out((i + 1) % n) = x(i);
  return out;
}

}  // namespace

TEST_CASE("ar1_step") {
  CHECK(models::ar1_step(1.0, 0.8) == doctest::Approx(0.8));
  CHECK(models::ar1_step(0.0, 3.7) == 0.0);
  CHECK(models::ar1_step(-2.5, 1.0) == -2.5);
  const auto m = models::make_ar1_model({0.8});
  CHECK(m.state_dim() == 1);
  CHECK(m.propagate(Vector::Constant(1, 2.0))(0) == doctest::Approx(1.6));
}

TEST_CASE("lorenz96_tendency reference cases") {
  const double f = 8.0;
  CHECK(models::lorenz96_tendency(Vector::Constant(8, f), f).cwiseAbs().maxCoeff() == 0.0);
  CHECK((models::lorenz96_tendency(Vector::Zero(6), f) - Vector::Constant(6, f)).norm() == 0.0);
  CHECK_THROWS_AS(models::lorenz96_tendency(Vector::Zero(3), f), DimensionTooSmall);
}

TEST_CASE("lorenz96 advection conserves energy") {
  RngStream rng(1, 0);
  for (int t = 0; t < 20; ++t) {
    const int n = 4 + t;
    const Vector x = random_vector(n, rng, 3.0);
    // advection part only: tendency with F = 0 plus the damping term
    const Vector adv = models::lorenz96_tendency(x, 0.0) + x;
    double brute = 0.0;
    for (int i = 0; i < n; ++i) {
      const double a = -x((i + n - 2) % n) * x((i + n - 1) % n) + x((i + n - 1) % n) * x((i + 1) % n);
      CHECK(adv(i) == doctest::Approx(a).epsilon(1e-12));
      brute += x(i) * a;
    }
    CHECK(std::abs(x.dot(adv)) < 1e-9 * (1.0 + x.squaredNorm()));
    CHECK(std::abs(brute) < 1e-9 * (1.0 + x.squaredNorm()));
  }
}

TEST_CASE("lorenz96 tendency is shift equivariant") {
  RngStream rng(2, 0);
  for (int t = 0; t < 10; ++t) {
    const Vector x = random_vector(10, rng, 4.0);
    const Vector lhs = models::lorenz96_tendency(rotate(x), 8.0);
    const Vector rhs = rotate(models::lorenz96_tendency(x, 8.0));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("rk4_step") {
  const Vector x = Vector::Constant(3, 1.5);
  auto zero = [](const Vector& v) { return Vector(Vector::Zero(v.size())); };
  CHECK((models::rk4_step(zero, x, 0.1) - x).norm() == 0.0);
  const double a = -0.7, dt = 0.3;
  auto lin = [a](const Vector& v) { return Vector(a * v); };
  const double h = a * dt;
  const double expected = 2.0 * (1 + h + h * h / 2 + h * h * h / 6 + h * h * h * h / 24);
  CHECK(models::rk4_step(lin, Vector::Constant(1, 2.0), dt)(0) == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("rk4 global error is fourth order") {
  auto decay = [](const Vector& v) { return Vector(-v); };
  auto error_at = [&](int steps) {
    Vector x = Vector::Constant(1, 1.0);
    const double dt = 1.0 / steps;
    for (int i = 0; i < steps; ++i) x = models::rk4_step(decay, x, dt);
    return std::abs(x(0) - std::exp(-1.0));
  };
  for (int steps : {4, 8, 16}) {
    const double ratio = error_at(steps) / error_at(2 * steps);
    CHECK(ratio > 14.0);
    CHECK(ratio < 18.0);
  }
}

TEST_CASE("lorenz96 fixed point is preserved") {
  models::Lorenz96Config cfg;
  const Vector fixed = Vector::Constant(cfg.n_vars, cfg.forcing);
  Vector x = fixed;
  for (int c = 0; c < 50; ++c) {
    x = models::lorenz96_propagate(x, cfg);
    CHECK((x - fixed).cwiseAbs().maxCoeff() <= 1e-12 * (c + 1));
  }
}

TEST_CASE("lorenz96 perturbation grows") {
  models::Lorenz96Config cfg;
  Vector x = Vector::Constant(8, 8.0);
  x(0) += 0.01;
  for (int c = 0; c < 10; ++c) x = models::lorenz96_propagate(x, cfg);
  CHECK((x - Vector::Constant(8, 8.0)).norm() > 0.01);
  const Vector spun = models::lorenz96_spinup(cfg, 500);
  CHECK(spun.allFinite());
  CHECK((spun - Vector::Constant(8, 8.0)).norm() > 1.0);
}

TEST_CASE("lorenz96 config validation") {
  models::Lorenz96Config cfg;
  cfg.steps_per_cycle = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  CHECK_THROWS_AS(models::Lorenz96Model{cfg}, InvalidArgument);
  cfg = {};
  cfg.n_vars = 3;
  CHECK_THROWS(cfg.validate());
  cfg = {};
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidArgument);
  CHECK(models::Lorenz96Config{}.cycle_length() == doctest::Approx(0.05));
}

TEST_CASE("lorenz96 model is shift equivariant over a cycle") {
  const models::Lorenz96Model model({});
  RngStream rng(4, 0);
  const Vector x = Vector::Constant(8, 8.0) + random_vector(8, rng);
  CHECK((model.propagate(rotate(x)) - rotate(model.propagate(x))).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("noiseless twin data follow the deterministic model") {
  const models::Lorenz96Model model({});
  const Vector x0 = models::lorenz96_spinup({}, 100);
  const SpdMatrix tiny = SpdMatrix::identity(8, 1e-16);
  RngStream rng(5, 0);
  const models::TwinData data = models::simulate_truth_and_obs(model, tiny, tiny, x0, 20, rng);
  Vector x = x0;
  for (int k = 1; k <= 20; ++k) {
    x = model.propagate(x);
    CHECK((data.observations.col(k - 1) - x).cwiseAbs().maxCoeff() < 1e-3);
  }
}

TEST_CASE("twin data are reproducible and round-trip through CSV") {
  const auto model = models::make_ar1_model({0.8});
  const SpdMatrix one = SpdMatrix::identity(1);
  RngStream a(9, 2), b(9, 2);
  const auto d1 = models::simulate_truth_and_obs(model, one, one, Vector::Zero(1), 50, a);
  const auto d2 = models::simulate_truth_and_obs(model, one, one, Vector::Zero(1), 50, b);
  std::ostringstream s1, s2;
  models::write_twin_csv(s1, d1);
  models::write_twin_csv(s2, d2);
  CHECK(s1.str() == s2.str());
  CHECK(d1.states.cols() == 51);
  CHECK(d1.observations.cols() == 50);
  std::istringstream in(s1.str());
  const auto back = models::read_twin_csv(in);
  CHECK((back.states - d1.states).norm() == 0.0);
  CHECK((back.observations - d1.observations).norm() == 0.0);
}

TEST_CASE("twin data dimension checks") {
  const auto model = models::make_ar1_model({0.8});
  RngStream rng(1, 0);
  CHECK_THROWS_AS(models::simulate_truth_and_obs(model, SpdMatrix::identity(2), SpdMatrix::identity(1),
                                                 Vector::Zero(1), 5, rng),
                  DimensionMismatch);
}

TEST_CASE("AR(1) truth has the stationary variance") {
  const auto model = models::make_ar1_model({0.8});
  const SpdMatrix one = SpdMatrix::identity(1);
  RngStream rng(17, 0);
  const auto data = models::simulate_truth_and_obs(model, one, one, Vector::Zero(1), 10000, rng);
  const Eigen::ArrayXd x = data.states.row(0).tail(9000).transpose().array();
  const double var = (x - x.mean()).square().sum() / (x.size() - 1.0);
  CHECK(std::abs(var - 1.0 / (1.0 - 0.64)) < 0.25);
}
