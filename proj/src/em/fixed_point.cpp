#include "ssmcovest/em/fixed_point.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ssmcovest/core/gaussian.hpp"
#include "ssmcovest/errors.hpp"

namespace ssmcovest::em {

namespace {

void check_aligned(const FilterRun& estep, const FilterRun& mstep, const core::SpdMatrix& q) {
  const int big_k = estep.cycles();
  if (big_k < 1) throw InvalidArgument("fixed point: runs must cover at least one cycle");
  if (mstep.cycles() != big_k || static_cast<int>(estep.ensembles.size()) != big_k + 1 ||
      static_cast<int>(mstep.ensembles.size()) != big_k + 1) {
    throw DimensionMismatch("fixed point: runs cover different cycle ranges");
  }
  if (estep.ensembles.front().dim() != q.dim()) {
    throw DimensionMismatch("fixed point: state dimension does not match q");
  }
}

// log w_{k-1}^(i) - 0.5 |L^{-1}(x_k^(j) - m_i)|^2 as an N_images x N_targets matrix.
Matrix log_kernel(const Matrix& targets_white, const Matrix& images_white, const Vector& log_w) {
  const Vector t2 = targets_white.colwise().squaredNorm().transpose();
  const Vector m2 = images_white.colwise().squaredNorm().transpose();
  Matrix d2 = -2.0 * images_white.transpose() * targets_white;
  d2.colwise() += m2;
  d2.rowwise() += t2.transpose();
  Matrix out = -0.5 * d2.cwiseMax(0.0);
  out.colwise() += log_w;
  return out;
}

Vector safe_log(const Vector& w) {
  return w.unaryExpr([](double v) {
    return v > 0.0 ? std::log(v) : -std::numeric_limits<double>::infinity();
  });
}

}  // namespace

double intermediate_G(const FilterRun& estep_run, const FilterRun& mstep_run,
                      const core::SpdMatrix& q) {
  check_aligned(estep_run, mstep_run, q);
  const double log_norm =
      -0.5 * q.dim() * std::log(2.0 * std::numbers::pi) - 0.5 * q.log_det();
  double total = 0.0;
  for (int k = 1; k <= estep_run.cycles(); ++k) {
    const filters::Ensemble& target = estep_run.ensembles[static_cast<std::size_t>(k)];
    const filters::Ensemble& source = mstep_run.ensembles[static_cast<std::size_t>(k - 1)];
    const Matrix& images = mstep_run.images[static_cast<std::size_t>(k - 1)];
    const Matrix terms = log_kernel(q.whiten(target.particles), q.whiten(images),
                                    safe_log(source.weights));
    for (int j = 0; j < target.size(); ++j) {
      const double w = target.weights(j);
      if (!(w > 0.0)) continue;
      const Vector col = terms.col(j);
      const double lse = core::log_sum_exp({col.data(), static_cast<std::size_t>(col.size())});
      if (!std::isfinite(lse)) {
        throw NonFiniteState("intermediate_G: mixture underflow at cycle " + std::to_string(k));
      }
      total += w * (lse + log_norm);
    }
  }
  return total;
}

Matrix fixed_point_matrix(const FilterRun& estep_run, const FilterRun& mstep_run,
                          const core::SpdMatrix& q_current) {
  check_aligned(estep_run, mstep_run, q_current);
  const int big_k = estep_run.cycles();
  const int n_x = q_current.dim();
  Matrix acc = Matrix::Zero(n_x, n_x);
  for (int k = 1; k <= big_k; ++k) {
    const filters::Ensemble& target = estep_run.ensembles[static_cast<std::size_t>(k)];
    const filters::Ensemble& source = mstep_run.ensembles[static_cast<std::size_t>(k - 1)];
    const Matrix& images = mstep_run.images[static_cast<std::size_t>(k - 1)];

    // Residual outer products are translation invariant; centering keeps the
    // expanded sum below free of cancellation.
    const Vector centre = target.particles.rowwise().mean();
    const Matrix x = target.particles.colwise() - centre;
    const Matrix m = images.colwise() - centre;

    Matrix rho = log_kernel(q_current.whiten(x), q_current.whiten(m), safe_log(source.weights));
    for (Eigen::Index j = 0; j < rho.cols(); ++j) {
      const double lse = core::log_sum_exp({rho.col(j).data(), static_cast<std::size_t>(rho.rows())});
      if (!std::isfinite(lse)) {
        throw NonFiniteState("fixed_point_update: mixture underflow at cycle " + std::to_string(k));
      }
      rho.col(j) = (rho.col(j).array() - lse).exp().matrix();
    }
    // c_ij = w_k^(j) rho^(j,i); sum_ij c_ij (x_j - m_i)(x_j - m_i)^T
    const Matrix c = rho * target.weights.asDiagonal();
    const Vector target_mass = c.colwise().sum().transpose();
    const Vector image_mass = c.rowwise().sum();
    const Matrix cross = m * c * x.transpose();
    acc += x * target_mass.asDiagonal() * x.transpose() - cross - cross.transpose() +
           m * image_mass.asDiagonal() * m.transpose();
  }
  acc /= static_cast<double>(big_k);
  return 0.5 * (acc + acc.transpose());
}

core::SpdMatrix fixed_point_update(const FilterRun& estep_run, const FilterRun& mstep_run,
                                   const core::SpdMatrix& q_current) {
  const Matrix q_new = fixed_point_matrix(estep_run, mstep_run, q_current);
  if (!q_new.allFinite()) throw DegenerateResiduals("fixed_point_update: non-finite update");
  try {
    return core::SpdMatrix::from_matrix_with_retry(q_new);
  } catch (const NotPositiveDefinite& e) {
    throw DegenerateResiduals(std::string("fixed_point_update: ") + e.what());
  }
}

}  // namespace ssmcovest::em
