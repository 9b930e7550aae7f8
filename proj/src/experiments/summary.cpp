#include "ssmcovest/experiments/summary.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "ssmcovest/core/csv.hpp"
#include "ssmcovest/errors.hpp"

namespace ssmcovest::experiments {

namespace {

constexpr const char* kMetrics[] = {"diag_mean", "offdiag_absmean", "subdiag_mean", "frob_to_true"};

double metric_value(const QMetrics& q, int which) {
  switch (which) {
    case 0: return q.diag_mean;
    case 1: return q.offdiag_absmean;
    case 2: return q.subdiag_mean;
    default: return q.frob_to_true;
  }
}

SummaryRow describe(std::vector<double> values) {
  SummaryRow row;
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  row.n = static_cast<int>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  row.mean = sum / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - row.mean) * (v - row.mean);
    row.sd = std::sqrt(ss / (n - 1.0));
  }
  const double half = 1.96 * row.sd / std::sqrt(n);
  row.ci_low = row.mean - half;
  row.ci_high = row.mean + half;
  row.q05 = quantile_sorted(values, 0.05);
  row.q25 = quantile_sorted(values, 0.25);
  row.q50 = quantile_sorted(values, 0.50);
  row.q75 = quantile_sorted(values, 0.75);
  row.q95 = quantile_sorted(values, 0.95);
  return row;
}

}  // namespace

double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw InvalidArgument("quantile_sorted: empty input");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<MetricsRow>& metrics) {
  // (algorithm, sigma) -> rep -> rows in em_iter order
  std::vector<std::pair<std::string, double>> groups;
  std::map<std::pair<std::string, double>, std::map<int, std::vector<const MetricsRow*>>> by_group;
  for (const auto& row : metrics) {
    const auto key = std::make_pair(row.algorithm, row.sigma_r2);
    if (!by_group.count(key)) groups.push_back(key);
    auto& reps = by_group[key];
    if (row.status == "ok") reps[row.rep].push_back(&row);
  }

  std::vector<SummaryRow> out;
  for (const auto& key : groups) {
    auto& reps = by_group[key];
    int last_iter = -1;
    for (auto& [rep, rows] : reps) {
      std::stable_sort(rows.begin(), rows.end(),
                       [](const MetricsRow* a, const MetricsRow* b) { return a->em_iter < b->em_iter; });
      last_iter = std::max(last_iter, rows.back()->em_iter);
    }
    for (int s = 0; s <= last_iter; ++s) {
      for (int m = 0; m < 4; ++m) {
        std::vector<double> values;
        for (const auto& [rep, rows] : reps) {
          const MetricsRow* current = nullptr;
          for (const MetricsRow* r : rows) {
            if (r->em_iter > s) break;
            current = r;
          }
          if (current) values.push_back(metric_value(current->q, m));
        }
        if (values.empty()) continue;
        SummaryRow row = describe(std::move(values));
        row.algorithm = key.first;
        row.sigma_r2 = key.second;
        row.em_iter = s;
        row.metric = kMetrics[m];
        out.push_back(std::move(row));
      }
    }
  }
  return out;
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  using core::format_double;
  core::write_csv_row(out, {"algorithm", "sigma_r2", "em_iter", "metric", "n", "mean", "sd", "ci_low",
                            "ci_high", "q05", "q25", "q50", "q75", "q95"});
  for (const auto& r : rows) {
    core::write_csv_row(out, {r.algorithm, format_double(r.sigma_r2), std::to_string(r.em_iter),
                              r.metric, std::to_string(r.n), format_double(r.mean), format_double(r.sd),
                              format_double(r.ci_low), format_double(r.ci_high), format_double(r.q05),
                              format_double(r.q25), format_double(r.q50), format_double(r.q75),
                              format_double(r.q95)});
  }
}

}  // namespace ssmcovest::experiments
