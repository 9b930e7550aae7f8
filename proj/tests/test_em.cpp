#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ssmcovest/core/gaussian.hpp"
#include "ssmcovest/core/matrix_metrics.hpp"
#include "ssmcovest/em/baselines.hpp"
#include "ssmcovest/em/em_estimator.hpp"
#include "ssmcovest/em/estimation_error.hpp"
#include "ssmcovest/em/fixed_point.hpp"
#include "ssmcovest/errors.hpp"
#include "ssmcovest/models/lorenz96.hpp"
#include "ssmcovest/models/twin.hpp"

using namespace ssmcovest;
using namespace ssmcovest::em;
using core::RngStream;
using core::SpdMatrix;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

// Single-particle run: ensembles x_0..x_K, images M(x_{k-1}).
FilterRun single_particle_run(const Matrix& states, const models::StateSpaceModel& model) {
  FilterRun run;
  for (Eigen::Index k = 0; k < states.cols(); ++k) {
    run.ensembles.push_back(filters::Ensemble::uniform(states.col(k), static_cast<int>(k)));
    if (k > 0) run.images.push_back(model.propagate_all(states.col(k - 1)));
  }
  return run;
}

Matrix random_matrix(int rows, int cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

// Brute-force residual covariance (1/K) sum beta beta^T.
Matrix residual_covariance(const Matrix& states, const models::StateSpaceModel& model) {
  const Eigen::Index n = states.rows(), big_k = states.cols() - 1;
  Matrix acc = Matrix::Zero(n, n);
  for (Eigen::Index k = 1; k <= big_k; ++k) {
    const Vector beta = states.col(k) - model.propagate(states.col(k - 1));
    for (Eigen::Index a = 0; a < n; ++a)
      for (Eigen::Index b = 0; b < n; ++b) acc(a, b) += beta(a) * beta(b);
  }
  return acc / static_cast<double>(big_k);
}

filters::GaussianStateSpace ar1_system(double q, double r) {
  return filters::GaussianStateSpace{scalar(0.8), scalar(1.0), SpdMatrix::identity(1, q),
                                     SpdMatrix::identity(1, r), Vector::Zero(1), SpdMatrix::identity(1, 1.0)};
}

Matrix ar1_observations(int cycles, std::uint64_t seed) {
  const auto model = models::make_ar1_model({0.8});
  RngStream rng(seed, 0);
  return models::simulate_truth_and_obs(model, SpdMatrix::identity(1), SpdMatrix::identity(1), Vector::Zero(1),
                                        cycles, rng)
      .observations;
}

}  // namespace

TEST_CASE("structure projection") {
  Matrix q(3, 3);
  q << 1, 0.2, 0.3, 0.2, 2, 0.4, 0.3, 0.4, 3;
  const Matrix d = project_structure(q, QStructure::DiagonalIsotropic);
  CHECK((d - 2.0 * Matrix::Identity(3, 3)).norm() < 1e-15);
  const Matrix t = project_structure(q, QStructure::TridiagonalIsotropic);
  CHECK(t(0, 1) == doctest::Approx(0.3));
  CHECK(t(2, 1) == doctest::Approx(0.3));
  CHECK(t(0, 2) == 0.0);
  CHECK(t(1, 1) == doctest::Approx(2.0));
  CHECK((project_structure(q, QStructure::Full) - q).norm() == 0.0);
}

TEST_CASE("em options validation") {
  EmOptions o;
  o.validate();
  CHECK(o.max_em_iterations == 25);
  CHECK(o.max_fp_iterations == 6);
  CHECK(o.em_tolerance == 1e-3);
  CHECK(o.fp_tolerance == 1e-3);
  o.em_tolerance = 0.0;
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
  o = {};
  o.max_fp_iterations = 0;
  CHECK_THROWS_AS(o.validate(), InvalidArgument);
}

TEST_CASE("intermediate G collapses to a sum of log densities with one particle") {
  RngStream rng(1, 0);
  const models::LinearModel model(0.9 * Matrix::Identity(3, 3), Matrix::Identity(3, 3));
  const Matrix states = random_matrix(3, 11, rng);
  const FilterRun run = single_particle_run(states, model);
  Matrix qm = random_matrix(3, 3, rng);
  const SpdMatrix q = core::spd_from_matrix(qm * qm.transpose() + Matrix::Identity(3, 3));
  double expected = 0.0;
  for (int k = 1; k <= 10; ++k) expected += core::gaussian_logpdf(states.col(k), model.propagate(states.col(k - 1)), q);
  CHECK(intermediate_G(run, run, q) == doctest::Approx(expected).epsilon(1e-12));

  const auto ar1 = models::make_ar1_model({0.0});
  Matrix zero_res(1, 2);
  zero_res << 0.0, 0.0;
  const FilterRun trivial = single_particle_run(zero_res, ar1);
  CHECK(intermediate_G(trivial, trivial, SpdMatrix::identity(1)) ==
        doctest::Approx(-0.5 * std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("intermediate G is maximized at the mean squared residual") {
  RngStream rng(2, 0);
  const auto model = models::make_ar1_model({0.8});
  const Matrix states = random_matrix(1, 31, rng);
  const FilterRun run = single_particle_run(states, model);
  const double q_star = residual_covariance(states, model)(0, 0);
  double best_q = 0.0, best = -1e300;
  for (int i = 0; i < 2000; ++i) {
    const double q = 0.01 + i * 0.002;
    const double g = intermediate_G(run, run, SpdMatrix::identity(1, q));
    if (g > best) {
      best = g;
      best_q = q;
    }
  }
  CHECK(std::abs(best_q - q_star) <= 0.002);
  CHECK(fixed_point_update(run, run, SpdMatrix::identity(1, 0.37)).values()(0, 0) ==
        doctest::Approx(q_star).epsilon(1e-12));
}

TEST_CASE("fixed point with one particle is the residual covariance") {
  RngStream rng(3, 0);
  for (int n : {1, 4}) {
    for (int big_k : {1, 50}) {
      const models::LinearModel model(0.7 * Matrix::Identity(n, n), Matrix::Identity(n, n));
      const Matrix states = random_matrix(n, big_k + 1, rng);
      const FilterRun run = single_particle_run(states, model);
      const Matrix oracle = residual_covariance(states, model);
      for (double q : {0.1, 1.0, 7.0}) {
        const Matrix got = fixed_point_matrix(run, run, SpdMatrix::identity(n, q));
        CHECK((got - oracle).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, oracle.cwiseAbs().maxCoeff()));
      }
    }
  }
}

TEST_CASE("fixed point with a unit residual") {
  const auto model = models::make_ar1_model({0.0});
  Matrix states(1, 2);
  states << 5.0, 1.0;
  const FilterRun run = single_particle_run(states, model);
  CHECK(fixed_point_update(run, run, SpdMatrix::identity(1, 3.0)).values()(0, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("identical residuals give c c^T through the jitter path") {
  const int n = 3, np = 4, big_k = 5;
  const models::LinearModel model(Matrix::Zero(n, n), Matrix::Identity(n, n));
  Vector c(n);
  c << 0.5, -1.0, 2.0;
  FilterRun run;
  for (int k = 0; k <= big_k; ++k) {
    run.ensembles.push_back(filters::Ensemble::uniform(c.replicate(1, np), k));
    if (k > 0) run.images.push_back(Matrix::Zero(n, np));
  }
  const Matrix expected = c * c.transpose();
  CHECK((fixed_point_matrix(run, run, SpdMatrix::identity(n)) - expected).norm() < 1e-12);
  const SpdMatrix q = fixed_point_update(run, run, SpdMatrix::identity(n));
  CHECK((q.values() - expected).norm() < 1e-8);
}

TEST_CASE("zero residuals are degenerate") {
  const models::LinearModel model(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  Matrix states = Matrix::Ones(2, 4);
  const FilterRun run = single_particle_run(states, model);
  CHECK_THROWS_AS(fixed_point_update(run, run, SpdMatrix::identity(2)), DegenerateResiduals);
}

TEST_CASE("responsibilities are normalized per target particle") {
  // Two images, one target at the first image: a tiny q makes the result the
  // residual to the nearest image regardless of the far one.
  const auto model = models::make_ar1_model({1.0});
  FilterRun run;
  Matrix prev(1, 2);
  prev << 0.0, 100.0;
  run.ensembles.push_back(filters::Ensemble::uniform(prev, 0));
  Matrix cur(1, 2);
  cur << 0.1, 0.1;
  run.ensembles.push_back(filters::Ensemble::uniform(cur, 1));
  run.images.push_back(prev);
  const SpdMatrix q = fixed_point_update(run, run, SpdMatrix::identity(1, 1.0));
  CHECK(q.values()(0, 0) == doctest::Approx(0.01).epsilon(1e-10));
}

TEST_CASE("em with zero iterations returns q0") {
  const auto model = models::make_ar1_model({0.8});
  const Matrix y = ar1_observations(20, 4);
  RngStream rng(5, 0);
  const filters::Ensemble init = filters::Ensemble::uniform(core::mvn_sample(Vector::Zero(1), SpdMatrix::identity(1), rng, 10));
  EmOptions o;
  o.max_em_iterations = 0;
  const EmTrace t = em_estimate_q(model, y, SpdMatrix::identity(1, 0.7), SpdMatrix::identity(1), init, o, RngStream(6, 0));
  CHECK(t.records.size() == 1);
  CHECK(t.final_record().q.values()(0, 0) == 0.7);
  const auto gss = ar1_system(0.7, 1.0);
  CHECK(em_kf_ks(gss, y, SpdMatrix::identity(1, 0.7), o).records.size() == 1);
  CHECK(em_enkf_enks(model, y, SpdMatrix::identity(1, 0.7), SpdMatrix::identity(1), init, o, RngStream(6, 0)).records.size() == 1);
}

TEST_CASE("em traces are deterministic, PD and consistent with the stopping rules") {
  const auto model = models::make_ar1_model({0.8});
  const Matrix y = ar1_observations(40, 7);
  RngStream rng(8, 0);
  const filters::Ensemble init = filters::Ensemble::uniform(core::mvn_sample(Vector::Zero(1), SpdMatrix::identity(1), rng, 20));
  EmOptions o;
  o.max_em_iterations = 6;
  for (FilterKind kind : {FilterKind::Vmpf, FilterKind::Sir}) {
    o.filter.kind = kind;
    const EmTrace a = em_estimate_q(model, y, SpdMatrix::identity(1, 0.6), SpdMatrix::identity(1), init, o, RngStream(9, 0));
    const EmTrace b = em_estimate_q(model, y, SpdMatrix::identity(1, 0.6), SpdMatrix::identity(1), init, o, RngStream(9, 0));
    REQUIRE(a.records.size() == b.records.size());
    CHECK(a.records.size() <= 7);
    for (std::size_t s = 0; s < a.records.size(); ++s) {
      const EmRecord& r = a.records[s];
      CHECK(r.iteration == static_cast<int>(s));
      CHECK(r.q.values() == b.records[s].q.values());
      CHECK(r.q.values()(0, 0) > 0.0);
      if (s == 0) continue;
      CHECK(r.fp_iterations >= 1);
      CHECK(r.fp_iterations <= o.max_fp_iterations);
      CHECK(static_cast<int>(r.fp_stops.size()) == r.fp_iterations);
      if (r.fp_iterations < o.max_fp_iterations) CHECK(r.stop_fp_last() <= o.fp_tolerance);
      const double stop = core::frobenius_rel_diff(a.records[s - 1].q.values(), r.q.values());
      CHECK(r.stop_em == doctest::Approx(stop).epsilon(1e-12));
    }
    if (a.em_iterations() < o.max_em_iterations) CHECK(a.final_record().stop_em <= o.em_tolerance);
    CHECK(a.final_means.cols() == 41);
    CHECK(a.final_diagnostics.size() == 40);
  }
}

TEST_CASE("filter divergence is reported with its location") {
  const models::Lorenz96Model model({});
  Matrix y = Matrix::Constant(8, 5, 1e200);
  RngStream rng(10, 0);
  const filters::Ensemble init = filters::Ensemble::uniform(core::mvn_sample(Vector::Constant(8, 8.0), SpdMatrix::identity(8), rng, 5));
  EmOptions o;
  o.filter.kind = FilterKind::Sir;
  try {
    em_estimate_q(model, y, SpdMatrix::identity(8), SpdMatrix::identity(8, 1e-300), init, o, RngStream(1, 0));
    FAIL("expected EstimationError");
  } catch (const EstimationError& e) {
    CHECK(e.em_iteration() == 0);
    CHECK(e.cycle() == 1);
  }
}

TEST_CASE("shumway-stoffer update with A = 0 is the smoothed second moment") {
  filters::GaussianStateSpace gss{scalar(0.0), scalar(1.0), SpdMatrix::identity(1, 0.8), SpdMatrix::identity(1, 0.5),
                                  Vector::Zero(1), SpdMatrix::identity(1, 1.0)};
  const Matrix y = (Matrix(1, 4) << 0.3, -1.0, 2.0, 0.7).finished();
  const auto sm = filters::rts_smoother(filters::kalman_filter(gss, y), gss);
  double expected = 0.0;
  for (int k = 1; k <= 4; ++k) expected += sm.covs[k](0, 0) + sm.means[k](0) * sm.means[k](0);
  CHECK(shumway_stoffer_q_update(sm, gss)(0, 0) == doctest::Approx(expected / 4).epsilon(1e-12));
}

TEST_CASE("single-innovation log-likelihood") {
  filters::GaussianStateSpace gss{scalar(0.8), scalar(1.0), SpdMatrix::identity(1, 0.5), SpdMatrix::identity(1, 0.3),
                                  Vector::Zero(1), SpdMatrix::identity(1, 2.0)};
  const Matrix y = scalar(1.1);
  const double expected = core::gaussian_logpdf(y.col(0), Vector::Zero(1), SpdMatrix::identity(1, 0.64 * 2.0 + 0.9 + 0.3));
  CHECK(incomplete_loglik_linear(gss, y, SpdMatrix::identity(1, 0.9)) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(incomplete_loglik_linear(gss, y, SpdMatrix::identity(1, 0.9)) == incomplete_loglik_linear(gss, y, SpdMatrix::identity(1, 0.9)));
}

TEST_CASE("linear em increases the likelihood on random problems") {
  RngStream rng(11, 0);
  int failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + trial % 3;
    Matrix a = 0.5 * random_matrix(n, n, rng) / std::sqrt(static_cast<double>(n));
    const Matrix h = Matrix::Identity(n, n);
    const Matrix qm = random_matrix(n, n, rng);
    const SpdMatrix q_true = core::spd_from_matrix(qm * qm.transpose() / n + 0.2 * Matrix::Identity(n, n));
    const SpdMatrix r = SpdMatrix::identity(n, 0.5 + rng.uniform());
    const models::LinearModel model(a, h);
    RngStream sim = rng.split(static_cast<std::uint64_t>(trial));
    const auto data = models::simulate_truth_and_obs(model, q_true, r, Vector::Zero(n), 30, sim);
    const filters::GaussianStateSpace gss{a, h, q_true, r, Vector::Zero(n), SpdMatrix::identity(n)};
    EmOptions o;
    o.max_em_iterations = 15;
    o.em_tolerance = 1e-12;
    const EmTrace t = em_kf_ks(gss, data.observations, SpdMatrix::identity(n, 0.5 + 2.0 * rng.uniform()), o);
    for (std::size_t s = 1; s < t.records.size(); ++s) {
      const double l_prev = incomplete_loglik_linear(gss, data.observations, t.records[s - 1].q);
      const double l_now = incomplete_loglik_linear(gss, data.observations, t.records[s].q);
      CHECK(t.records[s].log_evidence == doctest::Approx(l_now).epsilon(1e-12));
      if (l_now < l_prev - 1e-10) ++failures;
    }
  }
  CHECK(failures == 0);
}

TEST_CASE("linear em reaches the likelihood maximum") {
  const Matrix y = ar1_observations(100, 12);
  const auto gss = ar1_system(1.0, 1.0);
  EmOptions o;
  o.max_em_iterations = 2000;
  o.em_tolerance = 1e-10;
  const EmTrace t = em_kf_ks(gss, y, SpdMatrix::identity(1, 1.0), o);
  const double l_hat = incomplete_loglik_linear(gss, y, t.final_record().q);
  double best = -1e300;
  for (int i = 0; i < 200; ++i) {
    best = std::max(best, incomplete_loglik_linear(gss, y, SpdMatrix::identity(1, 0.2 + 2.8 * i / 199.0)));
  }
  CHECK(l_hat >= best - 1e-9);

  EmOptions one = o;
  one.max_em_iterations = 1;
  const EmTrace again = em_kf_ks(gss, y, t.final_record().q, one);
  CHECK(core::frobenius_rel_diff(again.records[1].q.values(), again.records[0].q.values()) < 1e-6);
}

TEST_CASE("ensemble smoother em matches the Kalman smoother em with many members") {
  const auto model = models::make_ar1_model({0.8});
  const Matrix y = ar1_observations(60, 13);
  const auto gss = ar1_system(1.0, 1.0);
  EmOptions o;
  o.max_em_iterations = 3;
  o.em_tolerance = 1e-12;
  const SpdMatrix q0 = SpdMatrix::identity(1, 0.5);
  const EmTrace kf = em_kf_ks(gss, y, q0, o);
  RngStream rng(14, 0);
  const filters::Ensemble init = filters::Ensemble::uniform(core::mvn_sample(Vector::Zero(1), SpdMatrix::identity(1), rng, 10000));
  const EmTrace en = em_enkf_enks(model, y, q0, SpdMatrix::identity(1), init, o, RngStream(15, 0));
  REQUIRE(en.records.size() == kf.records.size());
  for (std::size_t s = 1; s < kf.records.size(); ++s) {
    CHECK(std::abs(en.records[s].q.values()(0, 0) - kf.records[s].q.values()(0, 0)) < 0.05 * kf.records[s].q.values()(0, 0));
  }
}

TEST_CASE("ensemble residual covariance of exact trajectories") {
  const models::LinearModel model(0.5 * Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  std::vector<filters::Ensemble> ens;
  Matrix x = Matrix::Ones(2, 3);
  ens.push_back(filters::Ensemble::uniform(x, 0));
  for (int k = 1; k <= 4; ++k) {
    x = model.propagate_all(x);
    ens.push_back(filters::Ensemble::uniform(x, k));
  }
  CHECK(ensemble_residual_covariance(ens, model).norm() < 1e-15);
}
