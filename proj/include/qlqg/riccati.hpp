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

#include "qlqg/unravelling.hpp"

namespace qlqg {

struct RiccatiSolution {
  Matrix X;
  // ||residual||_F / (1 + ||constant term||_F)
  double residual = 0.0;
  Matrix closed_loop;
  std::vector<std::complex<double>> closed_loop_eigs;
  bool stabilizing = false;
  int newton_iterations = 0;
};

/// Stabilizing solution of A^T X + X A - X G X + Q = 0 (G, Q symmetric PSD):
/// A - G X strictly stable. The closed loop stored in the result is A - G X.
/// Throws NumericalError when no stabilizing solution is found.
RiccatiSolution solve_care(const Matrix& a, const Matrix& g, const Matrix& q,
                           const ToleranceConfig& tol = {});

/// Steady-state conditional covariance W_U:
///   0 = Omega W + W Omega^T - W C^T C W + N,  N = D - Gamma^T Gamma.
/// Requires (C, Omega_eff) detectable. The closed loop stored is the filter
/// matrix A - (W C^T + Gamma^T) C. Certifies both covariance LMIs.
RiccatiSolution solve_filter_care(const FilterModel& fm, const ToleranceConfig& tol = {});

/// Control Riccati P + A^T Y + Y A = Y B Q^{-1} B^T Y. Q must be positive
/// definite; (B^T, A^T) and (P, A) must be detectable. Closed loop stored is
/// A - B Q^{-1} B^T Y.
RiccatiSolution solve_control_care(const Matrix& a, const Matrix& b, const Matrix& p,
                                   const Matrix& q, const ToleranceConfig& tol = {});

/// True iff every eigenvalue of closed_loop has real part < -stability_margin.
bool certify_stabilizing(const Matrix& closed_loop, const ToleranceConfig& tol = {});

/// Riccati residual of the filter equation for an arbitrary W, normalized as
/// in RiccatiSolution::residual.
double filter_residual(const FilterModel& fm, const Matrix& w);

}  // namespace qlqg
