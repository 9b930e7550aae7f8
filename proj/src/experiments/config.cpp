#include "ssmcovest/experiments/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <fstream>
#include <functional>
#include <sstream>

#include "ssmcovest/core/csv.hpp"
#include "ssmcovest/errors.hpp"

namespace ssmcovest::experiments {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

bool valid_key(const std::string& key) {
  if (key.empty() || key.front() == '.' || key.back() == '.') return false;
  return std::all_of(key.begin(), key.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
  });
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  for (char c : text) {
    if (c == ',' || c == ' ' || c == '\t') {
      if (!item.empty()) out.push_back(std::move(item));
      item.clear();
    } else {
      item.push_back(c);
    }
  }
  if (!item.empty()) out.push_back(std::move(item));
  return out;
}

double to_double(const std::string& text) {
  const double v = core::parse_double(text);
  if (!std::isfinite(v)) throw InvalidArgument("expected a finite number, got '" + text + "'");
  return v;
}

long long to_integer(const std::string& text) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidArgument("expected an integer, got '" + text + "'");
  }
  return v;
}

int to_int(const std::string& text) {
  const long long v = to_integer(text);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw InvalidArgument("integer out of range: '" + text + "'");
  }
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& text) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidArgument("expected an unsigned 64-bit integer, got '" + text + "'");
  }
  return v;
}

bool to_bool(const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw InvalidArgument("expected true or false, got '" + text + "'");
}

std::vector<double> to_doubles(const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(to_double(item));
  if (out.empty()) throw InvalidArgument("expected a list of numbers");
  return out;
}

UniformBounds to_bounds(const std::string& text) {
  const auto v = to_doubles(text);
  if (v.size() != 2) throw InvalidArgument("expected two numbers 'low, high'");
  return {v[0], v[1]};
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += core::format_double(v[i]);
  }
  return out;
}

template <class Enum>
struct EnumNames {
  std::vector<std::pair<Enum, std::string>> names;

  Enum parse(const std::string& text) const {
    for (const auto& [value, name] : names) {
      if (name == text) return value;
    }
    std::string options;
    for (const auto& entry : names) options += (options.empty() ? "" : ", ") + entry.second;
    throw InvalidArgument("unknown value '" + text + "' (expected one of: " + options + ")");
  }
  std::string name(Enum value) const {
    for (const auto& [v, n] : names) {
      if (v == value) return n;
    }
    return "?";
  }
};

const EnumNames<ModelKind> kModelNames{{{ModelKind::Ar1, "ar1"}, {ModelKind::Lorenz96, "lorenz96"}}};
const EnumNames<QTrueStructure> kQTrueNames{{{QTrueStructure::IsotropicDiagonal, "isotropic-diagonal"},
                                             {QTrueStructure::IsotropicTridiagonal, "isotropic-tridiagonal"},
                                             {QTrueStructure::Explicit, "explicit"}}};
const EnumNames<em::QStructure> kStructureNames{{{em::QStructure::Full, "full"},
                                                 {em::QStructure::DiagonalIsotropic, "diagonal-isotropic"},
                                                 {em::QStructure::TridiagonalIsotropic, "tridiagonal-isotropic"}}};
const EnumNames<filters::KernelBandwidthRule> kBandwidthNames{
    {{filters::KernelBandwidthRule::MedianHeuristic, "median-heuristic"},
     {filters::KernelBandwidthRule::ScaledIdentity, "scaled-identity"}}};
const EnumNames<Algorithm> kAlgorithmNames{{{Algorithm::EmVmpf, "em-vmpf"},
                                            {Algorithm::EmSir, "em-sir"},
                                            {Algorithm::EmKfKs, "em-kf-ks"},
                                            {Algorithm::EmEnkfEnks, "em-enkf-enks"}}};

struct Field {
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
Field number_field(T ExperimentConfig::*member) {
  return {[member](ExperimentConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, int>) {
              c.*member = to_int(v);
            } else {
              c.*member = to_double(v);
            }
          },
          [member](const ExperimentConfig& c) {
            if constexpr (std::is_same_v<T, int>) {
              return std::to_string(c.*member);
            } else {
              return core::format_double(c.*member);
            }
          }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["name"] = {[](ExperimentConfig& c, const std::string& v) { c.name = v; },
                 [](const ExperimentConfig& c) { return c.name; }};
    t["model.kind"] = {[](ExperimentConfig& c, const std::string& v) { c.model = kModelNames.parse(v); },
                       [](const ExperimentConfig& c) { return kModelNames.name(c.model); }};
    t["model.ar1.coefficient"] = {
        [](ExperimentConfig& c, const std::string& v) { c.ar1.coefficient = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.ar1.coefficient); }};
    t["model.l96.n_vars"] = {
        [](ExperimentConfig& c, const std::string& v) { c.lorenz96.n_vars = to_int(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.lorenz96.n_vars); }};
    t["model.l96.forcing"] = {
        [](ExperimentConfig& c, const std::string& v) { c.lorenz96.forcing = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.lorenz96.forcing); }};
    t["model.l96.dt"] = {
        [](ExperimentConfig& c, const std::string& v) { c.lorenz96.dt = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.lorenz96.dt); }};
    t["model.l96.steps_per_cycle"] = {
        [](ExperimentConfig& c, const std::string& v) { c.lorenz96.steps_per_cycle = to_int(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.lorenz96.steps_per_cycle); }};
    t["model.spinup_cycles"] = number_field(&ExperimentConfig::spinup_cycles);
    t["q.structure"] = {
        [](ExperimentConfig& c, const std::string& v) { c.q_structure = kQTrueNames.parse(v); },
        [](const ExperimentConfig& c) { return kQTrueNames.name(c.q_structure); }};
    t["q.sigma2"] = number_field(&ExperimentConfig::q_sigma2);
    t["q.sigma2_sd"] = number_field(&ExperimentConfig::q_sigma2_sd);
    t["q.values"] = {[](ExperimentConfig& c, const std::string& v) { c.q_values = to_doubles(v); },
                     [](const ExperimentConfig& c) { return join_doubles(c.q_values); }};
    t["r.variance"] = {[](ExperimentConfig& c, const std::string& v) { c.r_variances = to_doubles(v); },
                       [](const ExperimentConfig& c) { return join_doubles(c.r_variances); }};
    t["cycles"] = number_field(&ExperimentConfig::cycles);
    t["repetitions"] = number_field(&ExperimentConfig::repetitions);
    t["seed"] = {[](ExperimentConfig& c, const std::string& v) { c.seed = to_u64(v); },
                 [](const ExperimentConfig& c) { return std::to_string(c.seed); }};
    t["truth.shared"] = {[](ExperimentConfig& c, const std::string& v) { c.truth_shared = to_bool(v); },
                         [](const ExperimentConfig& c) { return std::string(c.truth_shared ? "true" : "false"); }};
    t["prior.scale"] = number_field(&ExperimentConfig::prior_scale);
    t["q0.diag"] = {[](ExperimentConfig& c, const std::string& v) { c.q0_diag = to_bounds(v); },
                    [](const ExperimentConfig& c) { return join_doubles({c.q0_diag.low, c.q0_diag.high}); }};
    t["q0.subdiag"] = {
        [](ExperimentConfig& c, const std::string& v) { c.q0_subdiag = to_bounds(v); },
        [](const ExperimentConfig& c) { return join_doubles({c.q0_subdiag.low, c.q0_subdiag.high}); }};
    t["algorithms"] = {[](ExperimentConfig& c, const std::string& v) {
                         c.algorithms.clear();
                         for (const auto& item : split_list(v)) c.algorithms.push_back(kAlgorithmNames.parse(item));
                         if (c.algorithms.empty()) throw InvalidArgument("expected at least one algorithm");
                       },
                       [](const ExperimentConfig& c) {
                         std::string out;
                         for (auto a : c.algorithms) out += (out.empty() ? "" : ", ") + kAlgorithmNames.name(a);
                         return out;
                       }};
    t["vmpf.particles"] = number_field(&ExperimentConfig::vmpf_particles);
    t["sir.particles"] = number_field(&ExperimentConfig::sir_particles);
    t["enkf.members"] = number_field(&ExperimentConfig::enkf_members);
    t["em.max_iterations"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.max_em_iterations = to_int(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.em.max_em_iterations); }};
    t["em.tolerance"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.em_tolerance = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.em.em_tolerance); }};
    t["em.fp_max_iterations"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.max_fp_iterations = to_int(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.em.max_fp_iterations); }};
    t["em.fp_tolerance"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.fp_tolerance = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.em.fp_tolerance); }};
    t["em.structure"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.structure = kStructureNames.parse(v); },
        [](const ExperimentConfig& c) { return kStructureNames.name(c.em.structure); }};
    t["vmpf.step_size"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.filter.vmpf.step_size = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.em.filter.vmpf.step_size); }};
    t["vmpf.max_map_iterations"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.filter.vmpf.max_map_iterations = to_int(v); },
        [](const ExperimentConfig& c) { return std::to_string(c.em.filter.vmpf.max_map_iterations); }};
    t["vmpf.tolerance"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.filter.vmpf.grad_norm_tolerance = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.em.filter.vmpf.grad_norm_tolerance); }};
    t["vmpf.min_step_size"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.filter.vmpf.min_step_size = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.em.filter.vmpf.min_step_size); }};
    t["vmpf.bandwidth"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.filter.vmpf.bandwidth = kBandwidthNames.parse(v); },
        [](const ExperimentConfig& c) { return kBandwidthNames.name(c.em.filter.vmpf.bandwidth); }};
    t["vmpf.bandwidth_factor"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.filter.vmpf.bandwidth_factor = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.em.filter.vmpf.bandwidth_factor); }};
    t["vmpf.step_growth"] = {
        [](ExperimentConfig& c, const std::string& v) { c.em.filter.vmpf.step_growth = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.em.filter.vmpf.step_growth); }};
    t["enkf.inflation"] = {
        [](ExperimentConfig& c, const std::string& v) { c.enkf.inflation = to_double(v); },
        [](const ExperimentConfig& c) { return core::format_double(c.enkf.inflation); }};
    t["enks.lag"] = {[](ExperimentConfig& c, const std::string& v) {
                       if (v == "full") {
                         c.enks_lag.reset();
                       } else {
                         c.enks_lag = to_int(v);
                       }
                     },
                     [](const ExperimentConfig& c) {
                       return c.enks_lag ? std::to_string(*c.enks_lag) : std::string("full");
                     }};
    t["output.dump_q"] = {[](ExperimentConfig& c, const std::string& v) { c.dump_q = to_bool(v); },
                          [](const ExperimentConfig& c) { return std::string(c.dump_q ? "true" : "false"); }};
    return t;
  }();
  return table;
}

}  // namespace

std::string to_string(Algorithm a) { return kAlgorithmNames.name(a); }

Algorithm parse_algorithm(const std::string& name) {
  try {
    return kAlgorithmNames.parse(name);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("algorithm: ") + e.what());
  }
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("invalid configuration: " + what); };
  if (model == ModelKind::Lorenz96) {
    try {
      lorenz96.validate();
    } catch (const InvalidArgument& e) {
      fail(e.what());
    }
  }
  if (spinup_cycles < 0) fail("model.spinup_cycles must be >= 0");
  if (cycles < 1) fail("cycles must be >= 1");
  if (repetitions < 1) fail("repetitions must be >= 1");
  if (vmpf_particles < 1 || sir_particles < 1) fail("particle counts must be >= 1");
  if (enkf_members < 2) fail("enkf.members must be >= 2");
  if (r_variances.empty()) fail("r.variance needs at least one value");
  for (double r : r_variances) {
    if (!(r > 0.0)) fail("r.variance values must be > 0");
  }
  if (!(prior_scale > 0.0)) fail("prior.scale must be > 0");
  if (!(q0_diag.low < q0_diag.high) || !(q0_diag.low > 0.0)) fail("q0.diag needs 0 < low < high");
  if (!(q0_subdiag.low < q0_subdiag.high)) fail("q0.subdiag needs low < high");
  if (algorithms.empty()) fail("algorithms must not be empty");
  if (!(enkf.inflation > 0.0)) fail("enkf.inflation must be > 0");
  if (enks_lag && *enks_lag < 0) fail("enks.lag must be >= 0 or full");
  for (auto a : algorithms) {
    if (a == Algorithm::EmKfKs && model != ModelKind::Ar1) fail("em-kf-ks needs a linear model");
  }
  const int n = state_dim();
  if (q_structure == QTrueStructure::Explicit &&
      q_values.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n)) {
    fail("q.values must hold " + std::to_string(n * n) + " entries");
  }
  try {
    em.validate();
    (void)core::SpdMatrix::from_matrix(q_true());
  } catch (const NotPositiveDefinite&) {
    fail("true Q is not positive definite");
  } catch (const InvalidArgument& e) {
    fail(e.what());
  }
}

int ExperimentConfig::state_dim() const { return model == ModelKind::Ar1 ? 1 : lorenz96.n_vars; }

int ExperimentConfig::particles_for(Algorithm a) const {
  switch (a) {
    case Algorithm::EmVmpf:
      return vmpf_particles;
    case Algorithm::EmSir:
      return sir_particles;
    case Algorithm::EmEnkfEnks:
      return enkf_members;
    case Algorithm::EmKfKs:
      return 0;
  }
  return 0;
}

Matrix ExperimentConfig::q_true() const {
  const int n = state_dim();
  if (q_structure == QTrueStructure::Explicit) {
    Matrix q(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) q(i, j) = q_values[static_cast<std::size_t>(i * n + j)];
    }
    return q;
  }
  Matrix q = Matrix::Identity(n, n) * q_sigma2;
  if (q_structure == QTrueStructure::IsotropicTridiagonal && n > 1) {
    q.diagonal(1).setConstant(q_sigma2_sd);
    q.diagonal(-1).setConstant(q_sigma2_sd);
  }
  return q;
}

ConfigEntries parse_config_entries(std::istream& in, const std::string& source) {
  ConfigEntries entries;
  entries.source = source;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    const std::string content = trim(hash == std::string::npos ? line : line.substr(0, hash));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    if (!valid_key(key)) {
      throw ConfigError(source + ":" + std::to_string(number) + ": malformed key '" + key + "'");
    }
    if (value.empty()) {
      throw ConfigError(source + ":" + std::to_string(number) + ": empty value for '" + key + "'");
    }
    if (!entries.values.emplace(key, std::make_pair(value, number)).second) {
      throw ConfigError(source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    }
  }
  return entries;
}

ExperimentConfig build_config(const ConfigEntries& entries, const std::string& preset) {
  const auto& table = fields();
  std::map<std::string, std::pair<std::string, int>> base;
  std::map<std::string, std::map<std::string, std::pair<std::string, int>>> presets;
  for (const auto& [key, entry] : entries.values) {
    if (key.rfind("preset.", 0) == 0) {
      const auto rest = key.substr(7);
      const auto dot = rest.find('.');
      if (dot == std::string::npos || dot == 0) {
        throw ConfigError(entries.source + ":" + std::to_string(entry.second) +
                          ": preset keys look like preset.<name>.<key>");
      }
      presets[rest.substr(0, dot)][rest.substr(dot + 1)] = entry;
    } else {
      base[key] = entry;
    }
  }
  if (!preset.empty()) {
    const auto it = presets.find(preset);
    if (it == presets.end()) {
      throw ConfigError(entries.source + ": unknown preset '" + preset + "'");
    }
    for (const auto& [key, entry] : it->second) base[key] = entry;
  }
  for (const auto& [name, overrides] : presets) {
    for (const auto& [key, entry] : overrides) {
      if (!table.count(key)) {
        throw ConfigError(entries.source + ":" + std::to_string(entry.second) + ": unknown key '" +
                          key + "' in preset '" + name + "'");
      }
    }
  }

  ExperimentConfig cfg;
  for (const auto& [key, entry] : base) {
    const auto field = table.find(key);
    const std::string where = entries.source + ":" + std::to_string(entry.second);
    if (field == table.end()) throw ConfigError(where + ": unknown key '" + key + "'");
    try {
      field->second.set(cfg, entry.first);
    } catch (const InvalidArgument& e) {
      throw ConfigError(where + ": " + key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(std::istream& in, const std::string& source, const std::string& preset) {
  return build_config(parse_config_entries(in, source), preset);
}

ExperimentConfig load_config(const std::string& path, const std::string& preset) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in, path, preset);
}

std::string config_echo(const ExperimentConfig& cfg) {
  std::ostringstream out;
  for (const auto& [key, field] : fields()) {
    if (key == "seed") continue;
    const std::string value = field.get(cfg);
    if (value.empty()) continue;
    out << key << " = " << value << '\n';
  }
  return out.str();
}

std::unique_ptr<models::StateSpaceModel> make_model(const ExperimentConfig& cfg) {
  if (cfg.model == ModelKind::Ar1) {
    return std::make_unique<models::LinearModel>(models::make_ar1_model(cfg.ar1));
  }
  return std::make_unique<models::Lorenz96Model>(cfg.lorenz96);
}

}  // namespace ssmcovest::experiments
