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

#include <vector>

#include "qlqg/matrix_kernel.hpp"

namespace qlqg {

// Complex matrix stored as its real and imaginary parts.
struct SplitComplexMatrix {
  Matrix re;
  Matrix im;

  Eigen::Index rows() const { return re.rows(); }
  Eigen::Index cols() const { return re.cols(); }
  ComplexMatrix to_complex() const;
};

// Linear open system: H = x^T G x / 2 - x^T Sigma B u, c = C_tilde x.
struct SystemSpec {
  double hbar = 1.0;
  Matrix G;                      // 2N x 2N, symmetric
  SplitComplexMatrix c_tilde;    // L x 2N
  Matrix B;                      // 2N x M

  int modes() const { return static_cast<int>(G.rows() / 2); }
  int channels() const { return static_cast<int>(c_tilde.rows()); }
  int inputs() const { return static_cast<int>(B.cols()); }
};

// Unconditional moment dynamics d<x>/dt = A<x> + Bu, dV/dt = AV + VA^T + D.
struct MomentModel {
  double hbar = 1.0;
  Matrix A;
  Matrix D;
  Matrix C_bar;  // [Re C_tilde; Im C_tilde], 2L x 2N
  Matrix sigma;  // symplectic form, 2N x 2N

  int modes() const { return static_cast<int>(A.rows() / 2); }
  int channels() const { return static_cast<int>(C_bar.rows() / 2); }
};

SystemSpec validate_spec(SystemSpec spec, const ToleranceConfig& tol = {});

MomentModel derive_moment_model(const SystemSpec& spec);

struct Detectability {
  bool detectable = true;
  // Populated when !detectable: an eigenvalue with Re >= -stability_margin
  // and a direction v with A v = lambda v, C v ~ 0.
  std::complex<double> eigenvalue{0.0, 0.0};
  ComplexVector witness;

  explicit operator bool() const { return detectable; }
};

/// PBH test for (C, A): every eigenvalue of A with Re(lambda) >=
/// -stability_margin must have [lambda I - A; C] of full column rank.
Detectability pbh_detectable(const Matrix& c, const Matrix& a,
                             const ToleranceConfig& tol = {});

struct MomentTrajectory {
  std::vector<double> times;
  std::vector<Vector> means;
  std::vector<Matrix> covariances;
};

/// Integrates the unconditional moment equations with fixed-step RK4.
/// inputs[k] is the (constant) control on [t_grid[k], t_grid[k+1]); an empty
/// inputs vector means u = 0.
MomentTrajectory unconditional_evolution(const MomentModel& model, const Matrix& b,
                                         const std::vector<Vector>& inputs,
                                         const Vector& x0, const Matrix& v0,
                                         const std::vector<double>& t_grid,
                                         const ToleranceConfig& tol = {});

}  // namespace qlqg
