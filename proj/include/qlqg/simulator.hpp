// Copyright 2026 The qlqg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qlqg/feedback.hpp"
#include "qlqg/simd/ensemble_kernel.hpp"

namespace qlqg {

struct SimConfig {
  double dt = 1e-3;
  double t_final = 50.0;
  int n_traj = 2000;
  std::uint64_t seed = 0;
  double burn_in_fraction = 0.5;
  // Snapshot every record_stride steps (the final time is always recorded).
  int record_stride = 1000;
  Vector x0;  // initial conditional mean; empty means 0
  Matrix V0;  // initial conditional covariance; empty means hbar * I
  std::optional<simd::Isa> kernel;

  void validate() const;
};

struct TrajectoryRecord {
  // One entry per snapshot time.
  std::vector<Vector> mean_path;
  // Real current y and input u on the step starting at each snapshot time
  // (none for a snapshot at t_final). u is empty without a controller.
  std::vector<Vector> y_path;
  std::vector<Vector> u_path;
  // Time average of h = tr[P V_c] + <x>^T P <x> + u^T Q u after burn-in, and
  // the averages over the first and second halves of that window.
  double cost_accumulator = 0.0;
  double cost_first_half = 0.0;
  double cost_second_half = 0.0;
};

struct SimulationResult {
  SimConfig config;
  std::vector<double> times;      // snapshot times
  std::vector<Matrix> Vc_path;    // shared by all trajectories
  std::vector<TrajectoryRecord> trajectories;
  Matrix drift;                   // mean drift matrix used
  bool controlled = false;
  double min_uncertainty_margin = 0.0;  // min over steps of the LMI eigenvalue
};

/// Euler-Maruyama integration of the conditional mean with RK4 for V_c.
/// design == nullptr means u = 0. P and Q weight the running cost.
SimulationResult simulate_conditional(const MomentModel& model, const Matrix& b,
                                      const FilterModel& fm, const ControllerDesign* design,
                                      const Matrix& p, const Matrix& q, const SimConfig& cfg,
                                      const ToleranceConfig& tol = {});

struct CostEstimate {
  double m_hat = 0.0;
  double standard_error = 0.0;
  bool has_standard_error = false;
  bool nonstationary = false;
};

CostEstimate estimate_steady_cost(const SimulationResult& result);

struct ConsistencyPoint {
  double t = 0.0;
  Matrix total;          // E[(x - mu)(x - mu)^T] + V_c
  Matrix unconditional;  // V(t) from the moment equations
  double max_abs_deviation = 0.0;
  double max_z = 0.0;             // max |deviation| / standard error
  double relative_deviation = 0.0;  // max |deviation| / max |V|
  bool pass = false;
};

struct ConsistencyReport {
  std::vector<ConsistencyPoint> points;
  bool pass = false;
};

/// Compares the ensemble-averaged conditional state with the unconditional
/// moments at the requested snapshot times. Requires an uncontrolled run
/// with at least 500 trajectories. An entry passes when its deviation is
/// within max(3 standard errors, tol); a time passes when all entries do and
/// the relative deviation is at most rel_tol.
ConsistencyReport ensemble_consistency_check(const SimulationResult& result,
                                             const MomentModel& model,
                                             const std::vector<double>& times, double tol,
                                             double rel_tol = 0.05);

struct ComplexCurrentPath {
  std::vector<ComplexVector> J;
  bool lossy = false;  // U singular: only part of J is recoverable
};

/// (Re J; Im J) = (hbar U)^{1/2} y.
ComplexCurrentPath reconstruct_complex_current(const std::vector<Vector>& y_path, const Matrix& u,
                                               double hbar, const ToleranceConfig& tol = {});

}  // namespace qlqg
