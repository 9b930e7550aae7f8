#include "ssmcovest/experiments/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>

#include "ssmcovest/errors.hpp"
#include "ssmcovest/experiments/experiment.hpp"
#include "ssmcovest/experiments/summary.hpp"

namespace ssmcovest::experiments {

namespace {

namespace fs = std::filesystem;

struct Options {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::optional<int> reps;
  int threads = 1;
  std::string algorithm;
  std::string data;
  std::string metrics;
  int rep = 0;
  std::optional<double> r_variance;
};

struct IoError : Error {
  using Error::Error;
};

int default_threads() {
  if (const char* env = std::getenv("SSMCOVEST_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return 1;
}

std::ofstream open_output(const Options& o, const std::string& file) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  const fs::path path = fs::path(o.out) / file;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_input(const std::string& path, const std::string& what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + what + " '" + path + "'");
  return in;
}

ExperimentConfig resolved_config(const Options& o) {
  if (o.config.empty()) throw ConfigError("--config is required");
  ExperimentConfig cfg = load_config(o.config, o.preset);
  if (o.seed) cfg.seed = *o.seed;
  if (o.reps) cfg.repetitions = *o.reps;
  if (!o.algorithm.empty()) cfg.algorithms = {parse_algorithm(o.algorithm)};
  cfg.validate();
  return cfg;
}

double chosen_r_variance(const Options& o, const ExperimentConfig& cfg) {
  const double v = o.r_variance.value_or(cfg.r_variances.front());
  if (!(v > 0.0)) throw ConfigError("--r-variance must be > 0");
  return v;
}

void run_simulate(const Options& o) {
  const ExperimentConfig cfg = resolved_config(o);
  const auto model = make_model(cfg);
  const models::TwinData data = simulate_twin(cfg, *model, o.rep, chosen_r_variance(o, cfg));
  auto out = open_output(o, "twin.csv");
  models::write_twin_csv(out, data);
}

int run_estimate(const Options& o, std::ostream& err) {
  const ExperimentConfig cfg = resolved_config(o);
  if (o.data.empty()) throw ConfigError("--data is required");
  auto in = open_input(o.data, "data file");
  const models::TwinData data = models::read_twin_csv(in);
  const auto model = make_model(cfg);
  em::EmTrace trace;
  try {
    trace = estimate(cfg, cfg.algorithms.front(), *model, data, chosen_r_variance(o, cfg), o.rep);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    err << "estimation failed: " << e.what() << "\n";
    return 2;
  }
  auto out = open_output(o, "trace.csv");
  write_trace_csv(out, trace, cfg.q_true(), o.rep, true);
  if (cfg.dump_q) {
    auto dump = open_output(o, "q_dump.csv");
    write_trace_q_dump(dump, trace);
  }
  if (!trace.final_diagnostics.empty()) {
    auto diag = open_output(o, "diagnostics.csv");
    write_diagnostics_csv(diag, trace, data.states);
  }
  return 0;
}

void run_full_experiment(const Options& o) {
  const ExperimentConfig cfg = resolved_config(o);
  const ExperimentResult result = run_experiment(cfg, o.threads);
  {
    auto out = open_output(o, "metrics.csv");
    write_metrics_csv(out, result.metrics);
  }
  {
    auto out = open_output(o, "summary.csv");
    write_summary_csv(out, summarize(result.metrics));
  }
  {
    auto out = open_output(o, "timings.csv");
    write_timings_csv(out, result.timings);
  }
  {
    auto out = open_output(o, "config_echo.txt");
    out << config_echo(cfg);
  }
  if (cfg.dump_q) {
    auto out = open_output(o, "q_dump.csv");
    write_q_dump_csv(out, result.q_dump);
  }
}

void run_report(const Options& o) {
  if (o.metrics.empty()) throw ConfigError("--metrics is required");
  auto in = open_input(o.metrics, "metrics file");
  const std::vector<MetricsRow> rows = read_metrics_csv(in);
  auto out = open_output(o, "summary.csv");
  write_summary_csv(out, summarize(rows));
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Configuration file");
  cmd->add_option("--preset", o.preset, "Preset defined in the configuration file");
  cmd->add_option("--seed", o.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", o.out, "Output directory")->capture_default_str();
  cmd->add_option("--algorithm", o.algorithm, "em-vmpf, em-sir, em-kf-ks or em-enkf-enks");
}

}  // namespace

int cli_main(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Model error covariance estimation by EM with particle filters"};
  app.require_subcommand(1);
  Options o;
  o.threads = default_threads();

  auto* simulate = app.add_subcommand("simulate", "Write truth and observations as twin.csv");
  add_common(simulate, o);
  simulate->add_option("--rep", o.rep, "Repetition whose streams are used");
  simulate->add_option("--r-variance", o.r_variance, "Observation error variance");

  auto* est = app.add_subcommand("estimate", "Run one estimation on a twin.csv file");
  add_common(est, o);
  est->add_option("--data", o.data, "Twin data CSV")->required();
  est->add_option("--rep", o.rep, "Repetition whose streams are used");
  est->add_option("--r-variance", o.r_variance, "Observation error variance");

  auto* exp = app.add_subcommand("experiment", "Run the repetition protocol");
  add_common(exp, o);
  exp->add_option("--reps", o.reps, "Number of repetitions (overrides the config)");
  exp->add_option("--threads", o.threads, "Worker threads")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Recompute summary.csv from a metrics CSV");
  report->add_option("--metrics", o.metrics, "Metrics CSV")->required();
  report->add_option("--out", o.out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (simulate->parsed()) run_simulate(o);
    if (est->parsed()) return run_estimate(o, err);
    if (exp->parsed()) run_full_experiment(o);
    if (report->parsed()) run_report(o);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace ssmcovest::experiments
