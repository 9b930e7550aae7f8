#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ssmcovest/experiments/experiment.hpp"

namespace ssmcovest::experiments {

struct SummaryRow {
  std::string algorithm;
  double sigma_r2 = 0.0;
  int em_iter = 0;
  std::string metric;  // diag_mean, offdiag_absmean, subdiag_mean, frob_to_true
  int n = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample sd, 0 when n = 1
  double ci_low = 0.0;
  double ci_high = 0.0;
  double q05 = 0.0, q25 = 0.0, q50 = 0.0, q75 = 0.0, q95 = 0.0;
};

// Linear-interpolation quantile of sorted data (R type 7).
double quantile_sorted(const std::vector<double>& sorted, double p);

// Per (algorithm, sigma_r2, em_iter, metric) statistics across repetitions.
// A repetition that stopped before em_iter contributes its last estimate;
// failed repetitions are left out. Groups keep the order of first appearance.
std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& metrics);

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace ssmcovest::experiments
