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

// Shared generators and independent reference computations for the tests.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "qlqg/optimizer.hpp"

namespace qlqg::testing {

using Cplx = std::complex<double>;

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c,
                            double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = nd(rng);
  return m;
}

inline Matrix random_symmetric(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  const Matrix m = random_matrix(rng, n, n, scale);
  return 0.5 * (m + m.transpose());
}

inline Matrix random_psd(std::mt19937_64& rng, Eigen::Index n, Eigen::Index rank) {
  const Matrix f = random_matrix(rng, n, rank);
  return f * f.transpose();
}

inline SystemSpec random_system(std::mt19937_64& rng, int n_modes, int n_channels,
                                double hbar = 1.0) {
  SystemSpec s;
  s.hbar = hbar;
  s.G = random_symmetric(rng, 2 * n_modes);
  s.c_tilde.re = random_matrix(rng, n_channels, 2 * n_modes, 0.7);
  s.c_tilde.im = random_matrix(rng, n_channels, 2 * n_modes, 0.7);
  s.B = Matrix::Identity(2 * n_modes, 2 * n_modes);
  return validate_spec(s);
}

// Theta diagonal; Upsilon = Theta^1/2 K Theta^1/2 with K complex symmetric and
// ||K||_2 < 1, which keeps U positive semidefinite.
inline UnravellingMatrix random_unravelling(std::mt19937_64& rng, int l, bool efficient) {
  std::uniform_real_distribution<double> eff(0.3, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vector theta(l);
  for (int i = 0; i < l; ++i) theta(i) = efficient || unit(rng) < 0.3 ? 1.0 : eff(rng);
  Eigen::MatrixXcd k(l, l);
  const Matrix kr = random_symmetric(rng, l), ki = random_symmetric(rng, l);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < l; ++j) k(i, j) = Cplx(kr(i, j), ki(i, j));
  const double norm = Eigen::JacobiSVD<Eigen::MatrixXcd>(k).singularValues()(0);
  k *= 0.98 * unit(rng) / std::max(norm, 1e-12);
  const Eigen::VectorXcd s = theta.cwiseSqrt().cast<Cplx>();
  const Eigen::MatrixXcd ups = s.asDiagonal() * k * s.asDiagonal();
  return compose_u(theta, SplitComplexMatrix{ups.real(), ups.imag()});
}

// Filter model ingredients computed directly from the definitions with complex
// arithmetic and Eigen's own operator square root.
struct OracleFilter {
  Matrix A, D, C, Gamma, Omega, Noise;
};

inline OracleFilter oracle_filter(const SystemSpec& s, const Matrix& u) {
  const int n = s.modes(), l = s.channels();
  Matrix sigma = Matrix::Zero(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    sigma(2 * i, 2 * i + 1) = 1.0;
    sigma(2 * i + 1, 2 * i) = -1.0;
  }
  Matrix sl = Matrix::Zero(2 * l, 2 * l);
  sl.topRightCorner(l, l).setIdentity();
  sl.bottomLeftCorner(l, l) = -Matrix::Identity(l, l);
  Eigen::MatrixXcd ct(l, 2 * n);
  for (int i = 0; i < l; ++i)
    for (int j = 0; j < 2 * n; ++j) ct(i, j) = Cplx(s.c_tilde.re(i, j), s.c_tilde.im(i, j));
  const Eigen::MatrixXcd gram = ct.adjoint() * ct;
  Matrix cbar(2 * l, 2 * n);
  cbar << ct.real(), ct.imag();

  OracleFilter o;
  o.A = sigma * (s.G + gram.imag());
  o.D = s.hbar * sigma * gram.real() * sigma.transpose();
  const Matrix uh = Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (u + u.transpose())).operatorSqrt();
  o.C = 2.0 / std::sqrt(s.hbar) * uh * cbar;
  o.Gamma = -std::sqrt(s.hbar) * uh * sl * cbar * sigma.transpose();
  o.Omega = o.A - o.Gamma.transpose() * o.C;
  o.Noise = o.D - o.Gamma.transpose() * o.Gamma;
  return o;
}

// Stabilizing solution of A^T X + X A - X G X + Q = 0 from the stable
// eigenvectors of the Hamiltonian matrix.
inline Matrix oracle_care(const Matrix& a, const Matrix& g, const Matrix& q) {
  const Eigen::Index n = a.rows();
  Matrix h(2 * n, 2 * n);
  h << a, -g, -q, -a.transpose();
  Eigen::ComplexEigenSolver<Matrix> es(h);
  Eigen::MatrixXcd v(2 * n, n);
  Eigen::Index k = 0;
  for (Eigen::Index i = 0; i < 2 * n && k < n; ++i) {
    if (es.eigenvalues()(i).real() < 0.0) v.col(k++) = es.eigenvectors().col(i);
  }
  if (k != n) return Matrix();
  const Eigen::MatrixXcd x = v.bottomRows(n) * v.topRows(n).inverse();
  const Matrix xr = x.real();
  return 0.5 * (xr + xr.transpose());
}

// Filter-form wrapper: Omega W + W Omega^T - W C^T C W + N = 0.
inline Matrix oracle_filter_w(const OracleFilter& o) {
  return oracle_care(o.Omega.transpose(), o.C.transpose() * o.C, o.Noise);
}

inline double filter_residual_norm(const OracleFilter& o, const Matrix& w) {
  return (o.Omega * w + w * o.Omega.transpose() - w * o.C.transpose() * o.C * w + o.Noise).norm();
}

inline double max_real_eig(const Matrix& m) {
  return Eigen::EigenSolver<Matrix>(m).eigenvalues().real().maxCoeff();
}

inline double min_sym_eig(const Matrix& m) {
  return Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (m + m.transpose())).eigenvalues()(0);
}

inline Matrix embedded_lmi(const Matrix& w, double hbar) {
  const Eigen::Index n = w.rows();
  Matrix sigma = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n / 2; ++i) {
    sigma(2 * i, 2 * i + 1) = 1.0;
    sigma(2 * i + 1, 2 * i) = -1.0;
  }
  Matrix out(2 * n, 2 * n);
  out << w, -0.5 * hbar * sigma, 0.5 * hbar * sigma, w;
  return out;
}

// Stabilizing root of 2 w omega - c2 w^2 + noise = 0.
inline double scalar_filter_root(double omega, double c2, double noise) {
  return (omega + std::sqrt(omega * omega + c2 * noise)) / c2;
}

inline SystemSpec example_system() {
  SystemSpec s;
  s.G = Matrix(2, 2);
  s.G << 0, 1, 1, 0;
  s.c_tilde.re = Matrix(1, 2);
  s.c_tilde.re << 1, 0;
  s.c_tilde.im = Matrix(1, 2);
  s.c_tilde.im << 0, 1;
  s.B = Matrix::Identity(2, 2);
  return validate_spec(s);
}

inline ControlProblem example_control() {
  ControlProblem c;
  c.P = Matrix(2, 2);
  c.P << 1, -1, -1, 1;
  c.q_zero_limit = true;
  return c;
}

}  // namespace qlqg::testing
