#pragma once

#include <istream>
#include <ostream>

#include "ssmcovest/core/rng.hpp"
#include "ssmcovest/core/spd_matrix.hpp"
#include "ssmcovest/models/state_space_model.hpp"

namespace ssmcovest::models {

// Synthetic truth and observations of a twin experiment.
struct TwinData {
  Matrix states;        // N_x x (K+1), column k is x_k
  Matrix observations;  // M x K, column k-1 is y_k

  int cycles() const { return static_cast<int>(observations.cols()); }
};

// x_k = M(x_{k-1}) + beta_k, beta_k ~ N(0, q_true), k = 1..K. Noise enters
// once per assimilation cycle.
Matrix simulate_truth(const StateSpaceModel& model, const core::SpdMatrix& q_true,
                      const Vector& x0, int cycles, core::RngStream& rng);

// y_k = H(x_k) + eps_k for the columns 1..K of states.
Matrix simulate_observations(const StateSpaceModel& model, const Matrix& states,
                             const core::SpdMatrix& r_true, core::RngStream& rng);

// Truth from rng.split(0), observations from rng.split(1).
TwinData simulate_truth_and_obs(const StateSpaceModel& model, const core::SpdMatrix& q_true,
                                const core::SpdMatrix& r_true, const Vector& x0, int cycles,
                                core::RngStream& rng);

// Columns k, x_1..x_Nx, y_1..y_M. Row k = 0 carries x_0 and empty y cells.
void write_twin_csv(std::ostream& out, const TwinData& data);
TwinData read_twin_csv(std::istream& in);

}  // namespace ssmcovest::models
