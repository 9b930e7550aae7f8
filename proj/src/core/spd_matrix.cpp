#include "ssmcovest/core/spd_matrix.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "ssmcovest/errors.hpp"

namespace ssmcovest::core {

namespace {

std::optional<Matrix> try_cholesky(const Matrix& sym) {
  Eigen::LLT<Matrix> llt(sym);
  if (llt.info() != Eigen::Success) return std::nullopt;
  Matrix l = llt.matrixL();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return std::nullopt;
  }
  return l;
}

Matrix symmetrize(const Matrix& m, double jitter) {
  if (m.rows() != m.cols()) {
    throw DimensionMismatch("SpdMatrix: matrix is " + std::to_string(m.rows()) +
                            "x" + std::to_string(m.cols()) + ", not square");
  }
  if (m.rows() == 0) throw InvalidArgument("SpdMatrix: empty matrix");
  if (!(jitter >= 0.0)) throw InvalidArgument("SpdMatrix: jitter must be >= 0");
  Matrix sym = 0.5 * (m + m.transpose());
  sym.diagonal().array() += jitter;
  return sym;
}

}  // namespace

SpdMatrix SpdMatrix::from_matrix(const Matrix& m, double jitter) {
  Matrix sym = symmetrize(m, jitter);
  auto l = try_cholesky(sym);
  if (!l) throw NotPositiveDefinite("SpdMatrix: Cholesky factorization failed");
  return SpdMatrix(std::move(sym), std::move(*l));
}

SpdMatrix SpdMatrix::from_matrix_with_retry(const Matrix& m, double jitter) {
  Matrix sym = symmetrize(m, jitter);
  if (auto l = try_cholesky(sym)) return SpdMatrix(std::move(sym), std::move(*l));
  const double extra = 1e-10 * sym.diagonal().cwiseAbs().maxCoeff();
  sym.diagonal().array() += extra;
  if (auto l = try_cholesky(sym)) return SpdMatrix(std::move(sym), std::move(*l));
  throw NotPositiveDefinite("SpdMatrix: Cholesky factorization failed after jitter retry");
}

SpdMatrix SpdMatrix::identity(int dim, double scale) {
  if (dim < 1) throw InvalidArgument("SpdMatrix::identity: dim must be >= 1");
  if (!(scale > 0.0)) throw NotPositiveDefinite("SpdMatrix::identity: scale must be > 0");
  return SpdMatrix(scale * Matrix::Identity(dim, dim),
                   std::sqrt(scale) * Matrix::Identity(dim, dim));
}

double SpdMatrix::log_det() const {
  return 2.0 * chol_.diagonal().array().log().sum();
}

Vector SpdMatrix::solve(const Vector& v) const {
  if (v.size() != dim()) throw DimensionMismatch("SpdMatrix::solve: dimension mismatch");
  Vector z = chol_.triangularView<Eigen::Lower>().solve(v);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Matrix SpdMatrix::solve(const Matrix& m) const {
  if (m.rows() != dim()) throw DimensionMismatch("SpdMatrix::solve: dimension mismatch");
  Matrix z = chol_.triangularView<Eigen::Lower>().solve(m);
  return chol_.transpose().triangularView<Eigen::Upper>().solve(z);
}

Matrix SpdMatrix::inverse() const { return solve(Matrix(Matrix::Identity(dim(), dim()))); }

Vector SpdMatrix::whiten(const Vector& v) const {
  if (v.size() != dim()) throw DimensionMismatch("SpdMatrix::whiten: dimension mismatch");
  return chol_.triangularView<Eigen::Lower>().solve(v);
}

Matrix SpdMatrix::whiten(const Matrix& m) const {
  if (m.rows() != dim()) throw DimensionMismatch("SpdMatrix::whiten: dimension mismatch");
  return chol_.triangularView<Eigen::Lower>().solve(m);
}

Vector SpdMatrix::whiten_adjoint(const Vector& v) const {
  if (v.size() != dim()) throw DimensionMismatch("SpdMatrix::whiten_adjoint: dimension mismatch");
  return chol_.transpose().triangularView<Eigen::Upper>().solve(v);
}

double SpdMatrix::mahalanobis_sq(const Vector& v) const { return whiten(v).squaredNorm(); }

SpdMatrix spd_from_matrix(const Matrix& m, double jitter) {
  return SpdMatrix::from_matrix(m, jitter);
}

}  // namespace ssmcovest::core
