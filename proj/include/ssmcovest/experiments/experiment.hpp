#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "ssmcovest/core/rng.hpp"
#include "ssmcovest/em/em_estimator.hpp"
#include "ssmcovest/experiments/config.hpp"
#include "ssmcovest/models/twin.hpp"

namespace ssmcovest::experiments {

struct QMetrics {
  double diag_mean = 0.0;
  double offdiag_absmean = 0.0;  // 0 for 1 x 1
  double subdiag_mean = 0.0;     // first sub/super-diagonals; 0 for 1 x 1
  double frob_to_true = 0.0;
};

QMetrics q_metrics(const Matrix& q_hat, const Matrix& q_true);

struct MetricsRow {
  std::string algorithm;
  double sigma_r2 = 0.0;
  int rep = 0;
  int em_iter = 0;
  int fp_iters = 0;
  double stop_em = 0.0;
  double stop_fp_last = 0.0;
  QMetrics q;
  double loglik_proxy = 0.0;
  std::string status = "ok";
};

struct TimingRow {
  std::string algorithm;
  double sigma_r2 = 0.0;
  int rep = 0;
  int em_iter = 0;
  double wallclock_s = 0.0;
};

struct QDumpRow {
  std::string algorithm;
  double sigma_r2 = 0.0;
  int rep = 0;
  int em_iter = 0;
  Matrix q;
};

struct ExperimentResult {
  std::vector<MetricsRow> metrics;  // sorted by (algorithm, sigma_r2, rep, em_iter) in config order
  std::vector<TimingRow> timings;
  std::vector<QDumpRow> q_dump;     // filled when cfg.dump_q
};

// Random streams of one repetition. Every stream depends only on
// (seed, rep), never on the number of repetitions.
struct RepetitionStreams {
  core::RngStream truth;
  core::RngStream observations;
  core::RngStream q0;
  core::RngStream initial;
  core::RngStream filter;
};
RepetitionStreams repetition_streams(const ExperimentConfig& cfg, int rep);

// Initial truth state: Lorenz-96 spin-up, or a draw from the stationary AR(1)
// law N(0, Q / (1 - nu^2)) (zero when |nu| >= 1).
Vector initial_truth_state(const ExperimentConfig& cfg, core::RngStream& rng);

// Truth from streams.truth, observations for R = sigma_r2 I from
// streams.observations.
models::TwinData simulate_twin(const ExperimentConfig& cfg, const models::StateSpaceModel& model,
                               int rep, double sigma_r2);

// Q_0 with the structure of the true Q, entries drawn from the q0 bounds.
// Tridiagonal draws are repeated until positive definite.
core::SpdMatrix sample_q0(const ExperimentConfig& cfg, core::RngStream& rng);

// Prior N(x_0, prior.scale * mean(diag Q_true) I) of the filters.
core::SpdMatrix prior_covariance(const ExperimentConfig& cfg);

// Runs one algorithm on one data set with the streams of repetition rep.
em::EmTrace estimate(const ExperimentConfig& cfg, Algorithm algorithm,
                     const models::StateSpaceModel& model, const models::TwinData& data,
                     double sigma_r2, int rep);

// Full protocol over algorithms x r.variance x repetitions, distributed over
// threads workers. Estimator failures are recorded in the status column.
ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads = 1);

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows);
std::vector<MetricsRow> read_metrics_csv(std::istream& in);
void write_timings_csv(std::ostream& out, const std::vector<TimingRow>& rows);
void write_q_dump_csv(std::ostream& out, const std::vector<QDumpRow>& rows);

// Per-EM-iteration trace of one estimation.
void write_trace_csv(std::ostream& out, const em::EmTrace& trace, const Matrix& q_true, int rep,
                     bool include_wallclock);
void write_trace_q_dump(std::ostream& out, const em::EmTrace& trace);

// Per-cycle filter diagnostics under the final estimate (particle filters only).
void write_diagnostics_csv(std::ostream& out, const em::EmTrace& trace, const Matrix& truth);

}  // namespace ssmcovest::experiments
