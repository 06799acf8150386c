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

#include "qlqg/matrix_kernel.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "qlqg/errors.hpp"

namespace qlqg {

void ToleranceConfig::validate() const {
  if (!(psd_tol > 0.0) || !(residual_tol > 0.0) || !(stability_margin > 0.0)) {
    throw ValidationError("tolerance config: all fields must be strictly positive");
  }
}

Matrix symplectic_form(int n_modes) {
  if (n_modes < 1) throw ValidationError("symplectic_form: N must be >= 1");
  Matrix sigma = Matrix::Zero(2 * n_modes, 2 * n_modes);
  for (int n = 0; n < n_modes; ++n) {
    sigma(2 * n, 2 * n + 1) = 1.0;
    sigma(2 * n + 1, 2 * n) = -1.0;
  }
  return sigma;
}

Matrix involution_s(int n_channels) {
  if (n_channels < 1) throw ValidationError("involution_s: L must be >= 1");
  const int l = n_channels;
  Matrix s = Matrix::Zero(2 * l, 2 * l);
  s.topRightCorner(l, l).setIdentity();
  s.bottomLeftCorner(l, l) = -Matrix::Identity(l, l);
  return s;
}

double asymmetry(const Matrix& m) { return (m - m.transpose()).norm(); }

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

PsdCheck is_psd(const Matrix& m, const ToleranceConfig& tol) {
  if (m.rows() != m.cols()) throw ValidationError("is_psd: matrix is not square");
  const double scale = 1.0 + m.norm();
  const double asym = asymmetry(m);
  if (asym > tol.residual_tol * scale) {
    std::ostringstream os;
    os << "is_psd: matrix is not symmetric (||M - M^T|| = " << asym << ")";
    throw ValidationError(os.str());
  }
  PsdCheck out;
  if (m.size() == 0) {
    out.psd = true;
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  out.min_eigenvalue = es.eigenvalues()(0);
  out.witness = es.eigenvectors().col(0);
  out.psd = out.min_eigenvalue >= -tol.psd_tol * scale;
  return out;
}

Matrix hermitian_embed(const Matrix& w, double hbar) {
  if (w.rows() != w.cols() || w.rows() % 2 != 0) {
    throw ValidationError("hermitian_embed: W must be square with even dimension");
  }
  const int n = static_cast<int>(w.rows());
  const Matrix half_sigma = 0.5 * hbar * symplectic_form(n / 2);
  Matrix out(2 * n, 2 * n);
  out << w, -half_sigma, half_sigma, w;
  return out;
}

Matrix psd_sqrt(const Matrix& m, const ToleranceConfig& tol) {
  const PsdCheck check = is_psd(m, tol);
  if (!check.psd) {
    std::ostringstream os;
    os << "psd_sqrt: matrix has eigenvalue " << check.min_eigenvalue << " below tolerance";
    throw ValidationError(os.str());
  }
  if (m.size() == 0) return m;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return symmetrize(es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose());
}

std::vector<std::complex<double>> eigenvalues(const Matrix& m) {
  std::vector<std::complex<double>> out;
  if (m.size() == 0) return out;
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalError("eigenvalue iteration did not converge");
  out.reserve(static_cast<size_t>(m.rows()));
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) out.push_back(es.eigenvalues()(i));
  std::sort(out.begin(), out.end(), [](auto a, auto b) {
    return a.real() != b.real() ? a.real() < b.real() : a.imag() < b.imag();
  });
  return out;
}

double spectral_abscissa(const Matrix& m) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& z : eigenvalues(m)) best = std::max(best, z.real());
  return best;
}

namespace detail {

Matrix lyapunov_solve(const Matrix& a, const Matrix& q) {
  const Eigen::Index n = a.rows();
  // vec(A X + X A^T) = (I (x) A + A (x) I) vec(X), column-major vec.
  const Eigen::Index nn = n * n;
  Matrix k = Matrix::Zero(nn, nn);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index row = i + j * n;
      for (Eigen::Index p = 0; p < n; ++p) {
        k(row, p + j * n) += a(i, p);
        k(row, i + p * n) += a(j, p);
      }
    }
  }
  const Eigen::PartialPivLU<Matrix> lu(k);
  const Vector rhs = -Eigen::Map<const Vector>(q.data(), nn);
  Vector sol = lu.solve(rhs);
  // One step of iterative refinement.
  sol += lu.solve(rhs - k * sol);
  return symmetrize(Eigen::Map<const Matrix>(sol.data(), n, n));
}

}  // namespace detail

Matrix solve_lyapunov(const Matrix& a, const Matrix& q, const ToleranceConfig& tol) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || q.rows() != n || q.cols() != n) {
    throw ValidationError("solve_lyapunov: dimension mismatch");
  }
  if (spectral_abscissa(a) >= -tol.stability_margin) {
    throw NumericalError("no stationary unconditional covariance: drift is not strictly stable");
  }
  Matrix x = detail::lyapunov_solve(a, q);
  const double residual = (a * x + x * a.transpose() + q).norm();
  if (residual > tol.residual_tol * (1.0 + q.norm())) {
    std::ostringstream os;
    os << "solve_lyapunov: residual " << residual << " above tolerance";
    throw NumericalError(os.str());
  }
  return x;
}

}  // namespace qlqg
