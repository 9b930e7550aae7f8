#include "ssmcovest/models/state_space_model.hpp"

#include "ssmcovest/errors.hpp"

namespace ssmcovest::models {

Matrix StateSpaceModel::propagate_all(const Matrix& states) const {
  Matrix out(state_dim(), states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) out.col(j) = propagate(states.col(j));
  return out;
}

Matrix StateSpaceModel::observe_all(const Matrix& states) const {
  Matrix out(obs_dim(), states.cols());
  for (Eigen::Index j = 0; j < states.cols(); ++j) out.col(j) = observe(states.col(j));
  return out;
}

LinearModel::LinearModel(Matrix transition, Matrix observation)
    : transition_(std::move(transition)), observation_(std::move(observation)) {
  if (transition_.rows() != transition_.cols() || transition_.rows() == 0) {
    throw DimensionMismatch("LinearModel: transition matrix must be square and nonempty");
  }
  if (observation_.cols() != transition_.rows() || observation_.rows() == 0) {
    throw DimensionMismatch("LinearModel: observation matrix must be M x N_x");
  }
}

Vector LinearModel::propagate(const Vector& x) const {
  if (x.size() != transition_.cols()) throw DimensionMismatch("LinearModel::propagate");
  return transition_ * x;
}

Vector LinearModel::observe(const Vector& x) const {
  if (x.size() != observation_.cols()) throw DimensionMismatch("LinearModel::observe");
  return observation_ * x;
}

Vector LinearModel::observe_adjoint(const Vector&, const Vector& v) const {
  if (v.size() != observation_.rows()) throw DimensionMismatch("LinearModel::observe_adjoint");
  return observation_.transpose() * v;
}

double ar1_step(double x, double nu) { return nu * x; }

LinearModel make_ar1_model(const Ar1Config& cfg) {
  return LinearModel(Matrix::Constant(1, 1, cfg.coefficient), Matrix::Identity(1, 1));
}

}  // namespace ssmcovest::models
