#include "ssmcovest/core/matrix_metrics.hpp"

#include <string>

#include "ssmcovest/errors.hpp"

namespace ssmcovest::core {

namespace {
void check_same_shape(const Matrix& a, const Matrix& b, const char* who) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionMismatch(std::string(who) + ": shapes differ");
  }
}
}  // namespace

double frobenius_rel_diff(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "frobenius_rel_diff");
  const double norm_a = a.norm();
  if (norm_a == 0.0) throw ZeroNorm("frobenius_rel_diff: first argument has zero norm");
  return (a - b).norm() / norm_a;
}

double frobenius_norm_diff(const Matrix& a, const Matrix& b) {
  check_same_shape(a, b, "frobenius_norm_diff");
  return (a - b).norm();
}

}  // namespace ssmcovest::core
