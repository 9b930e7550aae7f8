#include "ssmcovest/models/twin.hpp"

#include <string>

#include "ssmcovest/core/csv.hpp"
#include "ssmcovest/core/gaussian.hpp"
#include "ssmcovest/errors.hpp"

namespace ssmcovest::models {

Matrix simulate_truth(const StateSpaceModel& model, const core::SpdMatrix& q_true,
                      const Vector& x0, int cycles, core::RngStream& rng) {
  if (x0.size() != model.state_dim() || q_true.dim() != model.state_dim()) {
    throw DimensionMismatch("simulate_truth: x0 / Q dimensions do not match the model");
  }
  if (cycles < 1) throw InvalidArgument("simulate_truth: need K >= 1");
  const Vector zero = Vector::Zero(model.state_dim());
  Matrix states(model.state_dim(), cycles + 1);
  states.col(0) = x0;
  for (int k = 1; k <= cycles; ++k) {
    states.col(k) = model.propagate(states.col(k - 1)) + core::mvn_sample(zero, q_true, rng, 1);
  }
  return states;
}

Matrix simulate_observations(const StateSpaceModel& model, const Matrix& states,
                             const core::SpdMatrix& r_true, core::RngStream& rng) {
  if (states.rows() != model.state_dim() || r_true.dim() != model.obs_dim()) {
    throw DimensionMismatch("simulate_observations: dimensions do not match the model");
  }
  if (states.cols() < 2) throw InvalidArgument("simulate_observations: need states x_0..x_K, K >= 1");
  const Vector zero = Vector::Zero(model.obs_dim());
  Matrix obs(model.obs_dim(), states.cols() - 1);
  for (Eigen::Index k = 1; k < states.cols(); ++k) {
    obs.col(k - 1) = model.observe(states.col(k)) + core::mvn_sample(zero, r_true, rng, 1);
  }
  return obs;
}

TwinData simulate_truth_and_obs(const StateSpaceModel& model, const core::SpdMatrix& q_true,
                                const core::SpdMatrix& r_true, const Vector& x0, int cycles,
                                core::RngStream& rng) {
  core::RngStream truth_rng = rng.split(0);
  core::RngStream obs_rng = rng.split(1);
  TwinData data;
  data.states = simulate_truth(model, q_true, x0, cycles, truth_rng);
  data.observations = simulate_observations(model, data.states, r_true, obs_rng);
  return data;
}

void write_twin_csv(std::ostream& out, const TwinData& data) {
  const Eigen::Index nx = data.states.rows();
  const Eigen::Index m = data.observations.rows();
  std::vector<std::string> fields;
  fields.push_back("k");
  for (Eigen::Index i = 0; i < nx; ++i) fields.push_back("x_" + std::to_string(i + 1));
  for (Eigen::Index i = 0; i < m; ++i) fields.push_back("y_" + std::to_string(i + 1));
  core::write_csv_row(out, fields);
  for (Eigen::Index k = 0; k < data.states.cols(); ++k) {
    fields.clear();
    fields.push_back(std::to_string(k));
    for (Eigen::Index i = 0; i < nx; ++i) fields.push_back(core::format_double(data.states(i, k)));
    for (Eigen::Index i = 0; i < m; ++i) {
      fields.push_back(k == 0 ? std::string() : core::format_double(data.observations(i, k - 1)));
    }
    core::write_csv_row(out, fields);
  }
}

TwinData read_twin_csv(std::istream& in) {
  const core::CsvTable table = core::read_csv(in);
  std::vector<std::size_t> x_cols;
  std::vector<std::size_t> y_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (table.header[c].rfind("x_", 0) == 0) x_cols.push_back(c);
    if (table.header[c].rfind("y_", 0) == 0) y_cols.push_back(c);
  }
  const std::size_t k_col = table.column("k");
  if (x_cols.empty() || y_cols.empty()) throw InvalidArgument("twin CSV needs x_* and y_* columns");
  if (table.rows.size() < 2) throw InvalidArgument("twin CSV needs rows k = 0..K with K >= 1");
  const auto n_rows = static_cast<Eigen::Index>(table.rows.size());
  TwinData data;
  data.states.resize(static_cast<Eigen::Index>(x_cols.size()), n_rows);
  data.observations.resize(static_cast<Eigen::Index>(y_cols.size()), n_rows - 1);
  for (Eigen::Index r = 0; r < n_rows; ++r) {
    const auto& row = table.rows[static_cast<std::size_t>(r)];
    if (std::stol(row[k_col]) != r) throw InvalidArgument("twin CSV rows must be k = 0, 1, 2, ...");
    for (std::size_t i = 0; i < x_cols.size(); ++i) {
      data.states(static_cast<Eigen::Index>(i), r) = core::parse_double(row[x_cols[i]]);
    }
    if (r == 0) continue;
    for (std::size_t i = 0; i < y_cols.size(); ++i) {
      data.observations(static_cast<Eigen::Index>(i), r - 1) = core::parse_double(row[y_cols[i]]);
    }
  }
  return data;
}

}  // namespace ssmcovest::models
