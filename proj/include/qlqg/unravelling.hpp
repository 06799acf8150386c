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

#include "qlqg/system_model.hpp"

namespace qlqg {

// U = (1/2) [[Theta + Re Y, Im Y], [Im Y, Theta - Re Y]] with Y = Upsilon.
struct UnravellingMatrix {
  Matrix U;                      // 2L x 2L
  Vector theta;                  // detection efficiencies
  SplitComplexMatrix upsilon;    // L x L, symmetric

  int channels() const { return static_cast<int>(theta.size()); }
};

/// Builds U from (Theta, Upsilon) and checks admissibility.
UnravellingMatrix compose_u(const Vector& theta, const SplitComplexMatrix& upsilon,
                            const ToleranceConfig& tol = {});

/// Splits U into (Theta, Upsilon). Each admissibility failure is reported
/// with its own message.
UnravellingMatrix decompose_u(const Matrix& u, const ToleranceConfig& tol = {});

/// Efficient heterodyne detection on every channel: U = I/2.
UnravellingMatrix heterodyne(int n_channels);

/// Single-channel detection with efficiency theta and Upsilon = theta * r * e^{2 i phi}.
/// r = 1 is homodyne at local-oscillator phase phi.
UnravellingMatrix single_channel(double theta, double r, double phi,
                                 const ToleranceConfig& tol = {});

inline UnravellingMatrix homodyne(double phi) { return single_channel(1.0, 1.0, phi); }

// Sign convention for Gamma. `flipped` exists only as a negative control.
enum class GammaSign { adopted, flipped };

// Matrices of the conditional moment equations
//   d<x>_c = (A<x>_c + Bu) dt + (V_c C^T + Gamma^T) dw
//   dV_c/dt = A V_c + V_c A^T + D - (V_c C^T + Gamma^T)(C V_c + Gamma)
// and the steady-state form with effective drift and diffusion.
struct FilterModel {
  Matrix C;          // 2 (U/hbar)^{1/2} C_bar
  Matrix Gamma;      // -(hbar U)^{1/2} S C_bar Sigma^T
  Matrix omega_eff;  // A - Gamma^T C
  Matrix noise_eff;  // D - Gamma^T Gamma
  Matrix A;
  Matrix D;
  double hbar = 1.0;
};

FilterModel filter_model(const MomentModel& model, const UnravellingMatrix& u,
                         const ToleranceConfig& tol = {},
                         GammaSign sign = GammaSign::adopted);

struct UnravellingRecovery {
  UnravellingMatrix unravelling;
  double residual = 0.0;  // ||hbar R^T U R - T||_F / (1 + ||D||_F)
  bool exact_inverse = false;
  bool flagged = false;   // residual above the requested tolerance
};

/// R = 2 C_bar W / hbar + S C_bar Sigma, the left/right factor in
/// hbar R^T U R = D + A W + W A^T.
Matrix recovery_factor(const Matrix& w, const MomentModel& model);

/// Finds an admissible U with hbar R^T U R = D + A W + W A^T. W must satisfy
/// both covariance LMIs. A solution whose residual exceeds
/// flag_tol * (1 + ||D||) is still returned, with `flagged` set.
UnravellingRecovery recover_u(const Matrix& w, const MomentModel& model,
                              const ToleranceConfig& tol = {}, double flag_tol = -1.0);

/// min eigenvalues of the two covariance LMIs: W + i hbar Sigma / 2 >= 0
/// (via the real embedding) and D + A W + W A^T >= 0.
struct LmiMargins {
  double uncertainty = 0.0;
  double evolution = 0.0;
};
LmiMargins lmi_margins(const Matrix& w, const MomentModel& model);
bool satisfies_lmis(const Matrix& w, const MomentModel& model, const ToleranceConfig& tol = {});

}  // namespace qlqg
