#pragma once

#include "ssmcovest/core/spd_matrix.hpp"
#include "ssmcovest/em/filter_run.hpp"

namespace ssmcovest::em {

// G(Q', Q) = sum_k sum_j w_{k,Q'}^(j) log sum_i w_{k-1,Q}^(i) phi(x_k^(j); M(x_{k-1}^(i)), Q)
// with x_k^(j), w_{k,Q'}^(j) from estep_run and x_{k-1}^(i), w_{k-1,Q}^(i),
// M(x_{k-1}^(i)) from mstep_run. Throws NonFiniteState when a mixture
// underflows completely.
double intermediate_G(const FilterRun& estep_run, const FilterRun& mstep_run,
                      const core::SpdMatrix& q);

// One substitution of the stationarity condition dG/dQ = 0:
//   Q_new = (1/K) sum_k sum_j w_k^(j) sum_i rho_k^(j,i) beta beta^T,
//   beta = x_k^(j) - M(x_{k-1}^(i)),
//   rho_k^(j,i) proportional to w_{k-1}^(i) exp(-0.5 beta^T q_current^{-1} beta),
// normalized over i for every (k, j). Throws DegenerateResiduals when Q_new is
// not positive definite after the jitter retry.
core::SpdMatrix fixed_point_update(const FilterRun& estep_run, const FilterRun& mstep_run,
                                   const core::SpdMatrix& q_current);

// Unvalidated sum behind fixed_point_update.
Matrix fixed_point_matrix(const FilterRun& estep_run, const FilterRun& mstep_run,
                          const core::SpdMatrix& q_current);

}  // namespace ssmcovest::em
