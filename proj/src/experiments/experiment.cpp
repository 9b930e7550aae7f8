#include "ssmcovest/experiments/experiment.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include "ssmcovest/core/csv.hpp"
#include "ssmcovest/core/gaussian.hpp"
#include "ssmcovest/core/matrix_metrics.hpp"
#include "ssmcovest/em/baselines.hpp"
#include "ssmcovest/errors.hpp"

namespace ssmcovest::experiments {

namespace {

using core::format_double;

std::string sanitize(std::string text) {
  for (char& c : text) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return text;
}

struct Job {
  std::size_t algorithm;
  std::size_t sigma;
  int rep;
};

struct JobOutput {
  std::vector<MetricsRow> metrics;
  std::vector<TimingRow> timings;
  std::vector<QDumpRow> q_dump;
};

JobOutput run_job(const ExperimentConfig& cfg, const models::StateSpaceModel& model,
                  const Matrix& q_true, const Job& job) {
  const Algorithm algorithm = cfg.algorithms[job.algorithm];
  const double sigma_r2 = cfg.r_variances[job.sigma];
  const std::string name = to_string(algorithm);
  JobOutput out;
  auto add = [&](int s, const Matrix& q, int fp_iters, double stop_em, double stop_fp,
                 double loglik, double wallclock, const std::string& status) {
    out.metrics.push_back(MetricsRow{name, sigma_r2, job.rep, s, fp_iters, stop_em, stop_fp,
                                     q_metrics(q, q_true), loglik, status});
    out.timings.push_back(TimingRow{name, sigma_r2, job.rep, s, wallclock});
    if (cfg.dump_q) out.q_dump.push_back(QDumpRow{name, sigma_r2, job.rep, s, q});
  };
  try {
    const models::TwinData data = simulate_twin(cfg, model, job.rep, sigma_r2);
    const em::EmTrace trace = estimate(cfg, algorithm, model, data, sigma_r2, job.rep);
    for (const auto& record : trace.records) {
      add(record.iteration, record.q.values(), record.fp_iterations, record.stop_em,
          record.stop_fp_last(), record.log_evidence, record.wallclock_s, "ok");
    }
  } catch (const Error& e) {
    out = JobOutput{};
    RepetitionStreams streams = repetition_streams(cfg, job.rep);
    const core::SpdMatrix q0 = sample_q0(cfg, streams.q0);
    const double nan = std::numeric_limits<double>::quiet_NaN();
    add(0, q0.values(), 0, 0.0, 0.0, nan, 0.0, "failed: " + sanitize(e.what()));
  }
  return out;
}

}  // namespace

QMetrics q_metrics(const Matrix& q_hat, const Matrix& q_true) {
  if (q_hat.rows() != q_true.rows() || q_hat.cols() != q_true.cols() || q_hat.rows() != q_hat.cols()) {
    throw DimensionMismatch("q_metrics: matrices must be square and of equal size");
  }
  const Eigen::Index n = q_hat.rows();
  QMetrics m;
  m.diag_mean = q_hat.diagonal().mean();
  if (n > 1) {
    double off = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) off += std::abs(q_hat(i, j));
    m.offdiag_absmean = off / static_cast<double>(n * (n - 1));
    m.subdiag_mean = 0.5 * (q_hat.diagonal(1).mean() + q_hat.diagonal(-1).mean());
  }
  m.frob_to_true = core::frobenius_norm_diff(q_true, q_hat);
  return m;
}

RepetitionStreams repetition_streams(const ExperimentConfig& cfg, int rep) {
  const core::RngStream master(cfg.seed, 0);
  const core::RngStream own = master.split(1 + static_cast<std::uint64_t>(rep));
  return RepetitionStreams{cfg.truth_shared ? master.split(0) : own.split(0), own.split(1),
                           own.split(2), own.split(3), own.split(4)};
}

Vector initial_truth_state(const ExperimentConfig& cfg, core::RngStream& rng) {
  if (cfg.model == ModelKind::Lorenz96) return models::lorenz96_spinup(cfg.lorenz96, cfg.spinup_cycles);
  const double nu = cfg.ar1.coefficient;
  Vector x0 = Vector::Zero(1);
  if (std::abs(nu) < 1.0) x0(0) = rng.normal() * std::sqrt(cfg.q_true()(0, 0) / (1.0 - nu * nu));
  return x0;
}

models::TwinData simulate_twin(const ExperimentConfig& cfg, const models::StateSpaceModel& model,
                               int rep, double sigma_r2) {
  RepetitionStreams streams = repetition_streams(cfg, rep);
  const core::SpdMatrix q_true = core::SpdMatrix::from_matrix(cfg.q_true());
  const core::SpdMatrix r = core::SpdMatrix::identity(model.obs_dim(), sigma_r2);
  core::RngStream x0_rng = streams.truth.split(0);
  core::RngStream noise_rng = streams.truth.split(1);
  models::TwinData data;
  data.states = models::simulate_truth(model, q_true, initial_truth_state(cfg, x0_rng), cfg.cycles,
                                       noise_rng);
  data.observations = models::simulate_observations(model, data.states, r, streams.observations);
  return data;
}

core::SpdMatrix sample_q0(const ExperimentConfig& cfg, core::RngStream& rng) {
  const int n = cfg.state_dim();
  auto draw = [&rng](const UniformBounds& b) { return b.low + (b.high - b.low) * rng.uniform(); };
  if (cfg.q_structure != QTrueStructure::IsotropicTridiagonal || n == 1) {
    return core::SpdMatrix::identity(n, draw(cfg.q0_diag));
  }
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const double d = draw(cfg.q0_diag);
    const double sd = draw(cfg.q0_subdiag);
    Matrix q = Matrix::Identity(n, n) * d;
    q.diagonal(1).setConstant(sd);
    q.diagonal(-1).setConstant(sd);
    try {
      return core::SpdMatrix::from_matrix(q);
    } catch (const NotPositiveDefinite&) {
    }
  }
  throw ConfigError("sample_q0: q0 bounds never give a positive definite tridiagonal matrix");
}

core::SpdMatrix prior_covariance(const ExperimentConfig& cfg) {
  return core::SpdMatrix::identity(cfg.state_dim(), cfg.prior_scale * cfg.q_true().diagonal().mean());
}

em::EmTrace estimate(const ExperimentConfig& cfg, Algorithm algorithm,
                     const models::StateSpaceModel& model, const models::TwinData& data,
                     double sigma_r2, int rep) {
  RepetitionStreams streams = repetition_streams(cfg, rep);
  const core::SpdMatrix q0 = sample_q0(cfg, streams.q0);
  const core::SpdMatrix r = core::SpdMatrix::identity(model.obs_dim(), sigma_r2);
  const core::SpdMatrix prior = prior_covariance(cfg);
  const Vector x0 = data.states.col(0);
  if (x0.size() != model.state_dim() || data.observations.rows() != model.obs_dim()) {
    throw DimensionMismatch("estimate: data do not match the configured model");
  }

  if (algorithm == Algorithm::EmKfKs) {
    const auto* linear = dynamic_cast<const models::LinearModel*>(&model);
    if (!linear) throw ConfigError("em-kf-ks needs a linear model");
    const filters::GaussianStateSpace gss{linear->transition(), linear->observation(), q0, r, x0, prior};
    return em::em_kf_ks(gss, data.observations, q0, cfg.em);
  }
  const filters::Ensemble initial = filters::Ensemble::uniform(
      core::mvn_sample(x0, prior, streams.initial, cfg.particles_for(algorithm)));
  if (algorithm == Algorithm::EmEnkfEnks) {
    return em::em_enkf_enks(model, data.observations, q0, r, initial, cfg.em, streams.filter,
                            em::EnsembleSmootherOptions{cfg.enkf, cfg.enks_lag});
  }
  em::EmOptions opts = cfg.em;
  opts.filter.kind = algorithm == Algorithm::EmSir ? em::FilterKind::Sir : em::FilterKind::Vmpf;
  return em::em_estimate_q(model, data.observations, q0, r, initial, opts, streams.filter);
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, int threads) {
  cfg.validate();
  const auto model = make_model(cfg);
  const Matrix q_true = cfg.q_true();
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < cfg.algorithms.size(); ++a) {
    for (std::size_t s = 0; s < cfg.r_variances.size(); ++s) {
      for (int rep = 0; rep < cfg.repetitions; ++rep) jobs.push_back(Job{a, s, rep});
    }
  }
  std::vector<JobOutput> outputs(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      outputs[i] = run_job(cfg, *model, q_true, jobs[i]);
    }
  };
  const int workers = std::max(1, std::min<int>(threads, static_cast<int>(jobs.size())));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  ExperimentResult result;
  for (auto& out : outputs) {
    std::move(out.metrics.begin(), out.metrics.end(), std::back_inserter(result.metrics));
    std::move(out.timings.begin(), out.timings.end(), std::back_inserter(result.timings));
    std::move(out.q_dump.begin(), out.q_dump.end(), std::back_inserter(result.q_dump));
  }
  return result;
}

void write_metrics_csv(std::ostream& out, const std::vector<MetricsRow>& rows) {
  core::write_csv_row(out, {"algorithm", "sigma_r2", "rep", "em_iter", "fp_iters", "stop_em",
                            "stop_fp_last", "q_diag_mean", "q_offdiag_absmean", "q_subdiag_mean",
                            "frob_to_true", "loglik_proxy", "status"});
  for (const auto& r : rows) {
    core::write_csv_row(out, {r.algorithm, format_double(r.sigma_r2), std::to_string(r.rep),
                              std::to_string(r.em_iter), std::to_string(r.fp_iters),
                              format_double(r.stop_em), format_double(r.stop_fp_last),
                              format_double(r.q.diag_mean), format_double(r.q.offdiag_absmean),
                              format_double(r.q.subdiag_mean), format_double(r.q.frob_to_true),
                              format_double(r.loglik_proxy), r.status});
  }
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  const core::CsvTable table = core::read_csv(in);
  const std::size_t c_alg = table.column("algorithm"), c_sig = table.column("sigma_r2"),
                    c_rep = table.column("rep"), c_it = table.column("em_iter"),
                    c_fp = table.column("fp_iters"), c_sem = table.column("stop_em"),
                    c_sfp = table.column("stop_fp_last"), c_dm = table.column("q_diag_mean"),
                    c_off = table.column("q_offdiag_absmean"), c_sub = table.column("q_subdiag_mean"),
                    c_fr = table.column("frob_to_true"), c_ll = table.column("loglik_proxy"),
                    c_st = table.column("status");
  std::vector<MetricsRow> rows;
  rows.reserve(table.rows.size());
  for (const auto& f : table.rows) {
    if (f.size() != table.header.size()) throw InvalidArgument("read_metrics_csv: ragged row");
    MetricsRow r;
    r.algorithm = f[c_alg];
    r.sigma_r2 = core::parse_double(f[c_sig]);
    r.rep = std::stoi(f[c_rep]);
    r.em_iter = std::stoi(f[c_it]);
    r.fp_iters = std::stoi(f[c_fp]);
    r.stop_em = core::parse_double(f[c_sem]);
    r.stop_fp_last = core::parse_double(f[c_sfp]);
    r.q.diag_mean = core::parse_double(f[c_dm]);
    r.q.offdiag_absmean = core::parse_double(f[c_off]);
    r.q.subdiag_mean = core::parse_double(f[c_sub]);
    r.q.frob_to_true = core::parse_double(f[c_fr]);
    r.loglik_proxy = core::parse_double(f[c_ll]);
    r.status = f[c_st];
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_timings_csv(std::ostream& out, const std::vector<TimingRow>& rows) {
  core::write_csv_row(out, {"algorithm", "sigma_r2", "rep", "em_iter", "wallclock_s"});
  for (const auto& r : rows) {
    core::write_csv_row(out, {r.algorithm, format_double(r.sigma_r2), std::to_string(r.rep),
                              std::to_string(r.em_iter), format_double(r.wallclock_s)});
  }
}

void write_q_dump_csv(std::ostream& out, const std::vector<QDumpRow>& rows) {
  std::vector<std::string> header{"algorithm", "sigma_r2", "rep", "em_iter"};
  const Eigen::Index n = rows.empty() ? 0 : rows.front().q.rows();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      header.push_back("q_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    }
  }
  core::write_csv_row(out, header);
  for (const auto& r : rows) {
    std::vector<std::string> fields{r.algorithm, format_double(r.sigma_r2), std::to_string(r.rep),
                                    std::to_string(r.em_iter)};
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) fields.push_back(format_double(r.q(i, j)));
    }
    core::write_csv_row(out, fields);
  }
}

void write_trace_csv(std::ostream& out, const em::EmTrace& trace, const Matrix& q_true, int rep,
                     bool include_wallclock) {
  std::vector<std::string> header{"rep", "em_iter", "fp_iters", "stop_em", "stop_fp_last",
                                  "q_diag_mean", "q_offdiag_absmean", "frob_to_true", "loglik_proxy"};
  if (include_wallclock) header.push_back("wallclock_s");
  core::write_csv_row(out, header);
  for (const auto& record : trace.records) {
    const QMetrics m = q_metrics(record.q.values(), q_true);
    std::vector<std::string> fields{std::to_string(rep), std::to_string(record.iteration),
                                    std::to_string(record.fp_iterations), format_double(record.stop_em),
                                    format_double(record.stop_fp_last()), format_double(m.diag_mean),
                                    format_double(m.offdiag_absmean), format_double(m.frob_to_true),
                                    format_double(record.log_evidence)};
    if (include_wallclock) fields.push_back(format_double(record.wallclock_s));
    core::write_csv_row(out, fields);
  }
}

void write_trace_q_dump(std::ostream& out, const em::EmTrace& trace) {
  const Eigen::Index n = trace.records.empty() ? 0 : trace.records.front().q.dim();
  std::vector<std::string> header{"em_iter"};
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      header.push_back("q_" + std::to_string(i + 1) + "_" + std::to_string(j + 1));
    }
  }
  core::write_csv_row(out, header);
  for (const auto& record : trace.records) {
    std::vector<std::string> fields{std::to_string(record.iteration)};
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) fields.push_back(format_double(record.q.values()(i, j)));
    }
    core::write_csv_row(out, fields);
  }
}

void write_diagnostics_csv(std::ostream& out, const em::EmTrace& trace, const Matrix& truth) {
  core::write_csv_row(out, {"k", "ess", "mean_update_norm", "map_iterations", "analysis_rmse"});
  for (const auto& d : trace.final_diagnostics) {
    double rmse = std::numeric_limits<double>::quiet_NaN();
    if (d.cycle < truth.cols() && d.cycle < trace.final_means.cols()) {
      rmse = std::sqrt((trace.final_means.col(d.cycle) - truth.col(d.cycle)).squaredNorm() /
                       static_cast<double>(truth.rows()));
    }
    core::write_csv_row(out, {std::to_string(d.cycle), format_double(d.ess),
                              format_double(d.mean_update_norm), std::to_string(d.map_iterations),
                              format_double(rmse)});
  }
}

}  // namespace ssmcovest::experiments
