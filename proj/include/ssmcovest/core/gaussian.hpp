#pragma once

#include <span>

#include "ssmcovest/core/rng.hpp"
#include "ssmcovest/core/spd_matrix.hpp"
#include "ssmcovest/core/types.hpp"

namespace ssmcovest::core {

// n draws from N(mean, cov), one per column (dim x n).
Matrix mvn_sample(const Vector& mean, const SpdMatrix& cov, RngStream& rng, int n);

// log N(x; mean, cov), evaluated through the Cholesky factor.
double gaussian_logpdf(const Vector& x, const Vector& mean, const SpdMatrix& cov);

// log(sum(exp(values))); -inf for an empty span or all -inf entries.
double log_sum_exp(std::span<const double> values);

// Turns log-weights into normalized weights in place and returns the
// log of their (unnormalized) sum. Returns -inf, leaving the input as is,
// when every entry is -inf or NaN.
double normalize_log_weights(Vector& log_weights);

// 1 / sum(w^2)
double effective_sample_size(const Vector& weights);

}  // namespace ssmcovest::core
