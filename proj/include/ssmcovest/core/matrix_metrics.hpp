#pragma once

#include "ssmcovest/core/types.hpp"

namespace ssmcovest::core {

// ||a - b||_F / ||a||_F. The first argument is the new iterate.
// Throws ZeroNorm when ||a||_F = 0.
double frobenius_rel_diff(const Matrix& a, const Matrix& b);

// ||a - b||_F
double frobenius_norm_diff(const Matrix& a, const Matrix& b);

}  // namespace ssmcovest::core
