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

#include <Eigen/Dense>

namespace qlqg {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

struct ToleranceConfig {
  // Minimum-eigenvalue slack, relative to 1 + ||M||.
  double psd_tol = 1e-9;
  // Equation-residual bound, relative.
  double residual_tol = 1e-9;
  // Required gap of eigenvalue real parts below zero.
  double stability_margin = 1e-8;

  // Throws ValidationError unless every field is strictly positive.
  void validate() const;
};

/// Block-diagonal direct sum of n_modes copies of [[0,1],[-1,0]].
Matrix symplectic_form(int n_modes);

/// [[0, I], [-I, 0]] with I the n_channels identity.
Matrix involution_s(int n_channels);

struct PsdCheck {
  bool psd = false;
  double min_eigenvalue = 0.0;
  // Eigenvector of the minimum eigenvalue; meaningful as a witness when !psd.
  Vector witness;

  explicit operator bool() const { return psd; }
};

/// Asymmetry ||M - M^T||_F.
double asymmetry(const Matrix& m);

/// (M + M^T) / 2.
Matrix symmetrize(const Matrix& m);

/// Eigenvalue test for positive semidefiniteness. The input must be symmetric
/// to within residual_tol (relative); otherwise ValidationError naming the
/// asymmetry norm is thrown.
PsdCheck is_psd(const Matrix& m, const ToleranceConfig& tol = {});

/// Real embedding [[W, -hbar*Sigma/2], [hbar*Sigma/2, W]] of W + i*hbar*Sigma/2.
/// The embedding is PSD iff the Hermitian uncertainty matrix is.
Matrix hermitian_embed(const Matrix& w, double hbar);

/// Symmetric PSD square root by eigendecomposition. Eigenvalues inside
/// -psd_tol*(1+||M||) are clamped to zero; anything more negative throws.
Matrix psd_sqrt(const Matrix& m, const ToleranceConfig& tol = {});

/// Solves A X + X A^T + Q = 0 by Kronecker vectorization. A must be strictly
/// stable; the returned X is exactly symmetric.
Matrix solve_lyapunov(const Matrix& a, const Matrix& q,
                      const ToleranceConfig& tol = {});

/// Eigenvalues of a general real square matrix.
std::vector<std::complex<double>> eigenvalues(const Matrix& m);

/// Largest real part over the spectrum.
double spectral_abscissa(const Matrix& m);

}  // namespace qlqg

namespace qlqg::detail {
// Kronecker-vectorized solve of A X + X A^T + Q = 0 without the stability
// pre-check or residual gate. Used inside Newton iterations.
Matrix lyapunov_solve(const Matrix& a, const Matrix& q);
}  // namespace qlqg::detail
