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

#include <optional>
#include <vector>

#include "qlqg/feedback.hpp"

namespace qlqg {

// Objective m(W) = tr[lambda W] + constant_term.
struct CostWeight {
  Matrix lambda;
  double constant_term = 0.0;
};

/// lambda = Y B Q^{-1} B^T Y, constant = tr[Y D].
CostWeight cost_weight(const RiccatiSolution& y, const Matrix& b, const Matrix& q,
                       const Matrix& d);

/// Q -> 0 with full-rank B: lambda = P, constant = 0.
CostWeight cost_weight_q_zero(const Matrix& p);

struct SdpOptions {
  double mu0 = 1.0;
  double mu_factor = 10.0;
  // Stop once mu <= final_mu_rel * (1 + |tr[lambda W]|).
  double final_mu_rel = 1e-9;
  int max_newton_per_stage = 200;
};

struct OptimizationResult {
  Matrix W_star;
  std::optional<UnravellingMatrix> U_star;
  double m_star = 0.0;
  LmiMargins lmi_residuals;
  double recover_residual = 0.0;
  bool recover_flagged = false;
  double barrier_mu_final = 0.0;
  double gap_bound = 0.0;  // mu_final * total LMI dimension
  int newton_steps = 0;

  CostWeight weight;
  std::optional<RiccatiSolution> control_riccati;  // Y, when Q is invertible
  // Filter Riccati re-solved at U_star, and its relative distance to W_star.
  std::optional<RiccatiSolution> verified_filter;
  double verification_mismatch = 0.0;
};

/// Strictly feasible point for both covariance LMIs, built from filter
/// solutions (heterodyne first) plus a small multiple of the identity.
Matrix strictly_feasible_start(const MomentModel& model, const ToleranceConfig& tol = {});

/// Minimizes tr[lambda W] over W with W + i hbar Sigma/2 >= 0 and
/// D + A W + W A^T >= 0 by a log-det barrier path-following method.
OptimizationResult solve_sdp(const CostWeight& weight, const MomentModel& model,
                             const ToleranceConfig& tol = {}, const SdpOptions& options = {});

struct OraclePoint {
  double theta = 1.0;
  double r = 1.0;
  double phi = 0.0;
  double cost = 0.0;
  bool stable = false;
};

struct OracleResult {
  double m_best = 0.0;
  double theta_best = 1.0;
  double r_best = 1.0;
  double phi_best = 0.0;
  UnravellingMatrix U_best;
  std::vector<OraclePoint> homodyne_sweep;  // theta = r = 1, one entry per phi
  int evaluated = 0;
  int skipped = 0;
};

/// Brute-force search over single-channel unravellings (N = L = 1) by
/// solving the filter Riccati at every grid point; phi steps by `resolution`
/// over [0, pi). Grid points whose Riccati solve fails are skipped.
OracleResult grid_oracle(const MomentModel& model, const CostWeight& weight, double resolution,
                         const ToleranceConfig& tol = {});

/// Full pipeline: control Riccati -> cost weight -> SDP -> U recovery ->
/// filter re-solve at U_star (must match W_star to 1e-6 (1 + ||W_star||)).
OptimizationResult optimize_unravelling(const SystemSpec& spec, const MomentModel& model,
                                        const ControlProblem& control,
                                        const ToleranceConfig& tol = {});

}  // namespace qlqg
