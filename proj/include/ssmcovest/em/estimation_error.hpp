#pragma once

#include <string>

#include "ssmcovest/errors.hpp"

namespace ssmcovest::em {

// Estimator failure located by EM iteration s, fixed-point iteration and
// assimilation cycle k. Unknown coordinates are -1.
class EstimationError : public Error {
 public:
  EstimationError(const std::string& reason, int em_iteration, int fp_iteration, int cycle);

  const std::string& reason() const { return reason_; }
  int em_iteration() const { return em_iteration_; }
  int fp_iteration() const { return fp_iteration_; }
  int cycle() const { return cycle_; }

  EstimationError located(int em_iteration, int fp_iteration) const;

 private:
  std::string reason_;
  int em_iteration_;
  int fp_iteration_;
  int cycle_;
};

}  // namespace ssmcovest::em
