#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ssmcovest/core/types.hpp"
#include "ssmcovest/em/em_estimator.hpp"
#include "ssmcovest/filters/enkf.hpp"
#include "ssmcovest/models/lorenz96.hpp"
#include "ssmcovest/models/state_space_model.hpp"

namespace ssmcovest::experiments {

enum class ModelKind { Ar1, Lorenz96 };
enum class QTrueStructure { IsotropicDiagonal, IsotropicTridiagonal, Explicit };
enum class Algorithm { EmVmpf, EmSir, EmKfKs, EmEnkfEnks };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& name);

struct UniformBounds {
  double low = 0.0;
  double high = 1.0;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ModelKind model = ModelKind::Ar1;
  models::Ar1Config ar1;
  models::Lorenz96Config lorenz96;
  int spinup_cycles = 500;

  QTrueStructure q_structure = QTrueStructure::IsotropicDiagonal;
  double q_sigma2 = 1.0;       // diagonal value
  double q_sigma2_sd = 0.0;    // sub/super-diagonal value (tridiagonal)
  std::vector<double> q_values;  // explicit, row-major

  std::vector<double> r_variances{1.0};  // R = sigma_R^2 I, one run per value
  int cycles = 100;
  int repetitions = 1;
  std::uint64_t seed = 1;
  bool truth_shared = true;
  double prior_scale = 1.0;

  UniformBounds q0_diag{0.5, 1.5};
  UniformBounds q0_subdiag{0.01, 0.15};

  std::vector<Algorithm> algorithms{Algorithm::EmVmpf};
  int vmpf_particles = 20;
  int sir_particles = 1000;
  int enkf_members = 50;

  em::EmOptions em;
  filters::EnkfOptions enkf;
  std::optional<int> enks_lag;

  bool dump_q = false;

  // Throws ConfigError describing the first violated constraint.
  void validate() const;
  int state_dim() const;
  int particles_for(Algorithm a) const;
  Matrix q_true() const;
};

// Parsed "key = value" lines with their line numbers.
struct ConfigEntries {
  std::string source;
  std::map<std::string, std::pair<std::string, int>> values;
};

// Grammar: one "key = value" per line; '#' starts a comment; blank lines are
// ignored; keys are dotted identifiers. Lines "preset.<name>.<key> = value"
// override <key> when <name> is selected. Duplicate keys are errors.
ConfigEntries parse_config_entries(std::istream& in, const std::string& source);

// Applies the entries (and the selected preset) to the defaults. Unknown
// keys, malformed values and unknown presets raise ConfigError with the
// source and line.
ExperimentConfig build_config(const ConfigEntries& entries, const std::string& preset = "");

ExperimentConfig load_config(const std::string& path, const std::string& preset = "");
ExperimentConfig parse_config(std::istream& in, const std::string& source,
                              const std::string& preset = "");

// Resolved configuration as "key = value" lines, seed omitted.
std::string config_echo(const ExperimentConfig& cfg);

std::unique_ptr<models::StateSpaceModel> make_model(const ExperimentConfig& cfg);

}  // namespace ssmcovest::experiments
