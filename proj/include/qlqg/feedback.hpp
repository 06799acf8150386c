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

#include <complex>
#include <vector>

#include "qlqg/riccati.hpp"

namespace qlqg {

// Steady-state cost m = E[<x^T P x>_c + u^T Q u].
struct ControlProblem {
  Matrix P;                   // 2N x 2N, PSD
  Matrix Q;                   // M x M, PSD; ignored when q_zero_limit
  bool q_zero_limit = false;  // unconstrained control: Q -> 0 with full-rank B
};

ControlProblem validate_control(ControlProblem problem, const SystemSpec& spec,
                                const ToleranceConfig& tol = {});

enum class ControllerKind { optimal, markovian };

struct ControllerDesign {
  ControllerKind kind = ControllerKind::markovian;
  // K (M x 2N) for optimal designs, u = -K <x>_c; F (M x 2L) for Markovian, u = F y.
  Matrix gain;
  Matrix W;              // conditional covariance the design was built on
  Matrix M_closed;       // mean dynamics: A - B K, or A + B F C
  Matrix filter_closed;  // A - (W C^T + Gamma^T) C
  std::vector<std::complex<double>> eigs;  // of M_closed
  double predicted_cost = 0.0;
  // ||B F + W C^T + Gamma^T||_F; zero for exact Markovian noise cancellation.
  double cancellation_residual = 0.0;
  bool pseudo_inverse = false;
};

/// K = Q^{-1} B^T Y.
Matrix optimal_gain(const RiccatiSolution& y, const Matrix& b, const Matrix& q);

/// tr[Y B Q^{-1} B^T Y W] + tr[Y D].
double optimal_cost(const RiccatiSolution& y, const Matrix& b, const Matrix& q,
                    const Matrix& d, const Matrix& w);

/// Q -> 0 limit with full-rank B: tr[P W].
double optimal_cost_q_zero(const Matrix& p, const Matrix& w);

struct MarkovianGain {
  Matrix F;
  double cancellation_residual = 0.0;
  bool pseudo_inverse = false;
};

/// Solves B F = -(W C^T + Gamma^T). Square invertible B uses the exact inverse;
/// wide full-row-rank B uses the right pseudo-inverse. Otherwise throws.
MarkovianGain markovian_gain(const Matrix& w, const FilterModel& fm, const Matrix& b);

ControllerDesign design_markovian(const Matrix& w, const FilterModel& fm, const Matrix& b,
                                  const Matrix& p, const ToleranceConfig& tol = {});

ControllerDesign design_optimal(const RiccatiSolution& y, const Matrix& w, const FilterModel& fm,
                                const Matrix& b, const Matrix& q,
                                const ToleranceConfig& tol = {});

struct ClosedLoop {
  Matrix mean_dynamics;
  Matrix filter_error;
  std::vector<std::complex<double>> mean_eigs;
  std::vector<std::complex<double>> filter_eigs;
};

ClosedLoop closed_loop_matrix(const ControllerDesign& design, const FilterModel& fm,
                              const Matrix& b);

}  // namespace qlqg
