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

#include "qlqg/riccati.hpp"

#include <cmath>
#include <sstream>

#include "qlqg/errors.hpp"

namespace qlqg {

namespace {

Matrix care_residual(const Matrix& a, const Matrix& g, const Matrix& q, const Matrix& x) {
  return a.transpose() * x + x * a - x * g * x + q;
}

// Matrix sign function by determinant-scaled Newton iteration. Returns false
// if an iterate becomes singular (eigenvalue on the imaginary axis).
bool matrix_sign(const Matrix& h, Matrix& sign) {
  const Eigen::Index n = h.rows();
  Matrix z = h;
  for (int it = 0; it < 200; ++it) {
    Eigen::PartialPivLU<Matrix> lu(z);
    const double det = lu.determinant();
    if (!std::isfinite(det) || det == 0.0) return false;
    const Matrix z_inv = lu.inverse();
    if (!z_inv.allFinite()) return false;
    double c = std::pow(std::abs(det), 1.0 / static_cast<double>(n));
    if (!(c > 0.0) || !std::isfinite(c)) c = 1.0;
    const Matrix next = 0.5 * (z / c + c * z_inv);
    const double change = (next - z).norm();
    z = next;
    if (change <= 1e-13 * z.norm()) {
      sign = z;
      return true;
    }
  }
  sign = z;
  return (sign * sign - Matrix::Identity(n, n)).norm() < 1e-8 * n;
}

}  // namespace

RiccatiSolution solve_care(const Matrix& a, const Matrix& g, const Matrix& q,
                           const ToleranceConfig& tol) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n || g.rows() != n || g.cols() != n || q.rows() != n || q.cols() != n) {
    throw ValidationError("solve_care: dimension mismatch");
  }
  const Matrix gs = symmetrize(g);
  const Matrix qs = symmetrize(q);

  // Hamiltonian [[A, -G], [-Q, -A^T]]; the stable invariant subspace
  // span[I; X] is the kernel of sign(H) + I.
  Matrix h(2 * n, 2 * n);
  h << a, -gs, -qs, -a.transpose();
  Matrix sign;
  Matrix x;
  if (matrix_sign(h, sign)) {
    const Matrix w11 = sign.topLeftCorner(n, n);
    const Matrix w12 = sign.topRightCorner(n, n);
    const Matrix w21 = sign.bottomLeftCorner(n, n);
    const Matrix w22 = sign.bottomRightCorner(n, n);
    Matrix lhs(2 * n, n), rhs(2 * n, n);
    lhs << w12, w22 + Matrix::Identity(n, n);
    rhs << w11 + Matrix::Identity(n, n), w21;
    x = symmetrize(lhs.colPivHouseholderQr().solve(-rhs));
  }
  if (x.size() == 0 || !x.allFinite()) {
    throw NumericalError("solve_care: Hamiltonian has eigenvalues on the imaginary axis; "
                         "no stabilizing solution");
  }

  // Newton-Kleinman refinement.
  RiccatiSolution out;
  const double scale = 1.0 + qs.norm();
  double res = care_residual(a, gs, qs, x).norm() / scale;
  for (int it = 0; it < 50 && res > 1e-15; ++it) {
    const Matrix acl = a - gs * x;
    if (spectral_abscissa(acl) >= 0.0) break;
    const Matrix next =
        detail::lyapunov_solve(acl.transpose(), qs + x * gs * x);
    const double next_res = care_residual(a, gs, qs, next).norm() / scale;
    if (!next.allFinite() || next_res >= res) break;
    x = next;
    res = next_res;
    ++out.newton_iterations;
  }

  out.X = x;
  out.residual = res;
  out.closed_loop = a - gs * x;
  out.closed_loop_eigs = eigenvalues(out.closed_loop);
  out.stabilizing = certify_stabilizing(out.closed_loop, tol);
  if (!out.stabilizing) {
    std::ostringstream os;
    os << "solve_care: no stabilizing solution (closed-loop spectral abscissa "
       << spectral_abscissa(out.closed_loop) << ")";
    throw NumericalError(os.str());
  }
  if (out.residual > tol.residual_tol) {
    std::ostringstream os;
    os << "solve_care: residual " << out.residual << " above tolerance";
    throw NumericalError(os.str());
  }
  return out;
}

double filter_residual(const FilterModel& fm, const Matrix& w) {
  const Matrix res = fm.omega_eff * w + w * fm.omega_eff.transpose() -
                     w * fm.C.transpose() * fm.C * w + fm.noise_eff;
  return res.norm() / (1.0 + fm.noise_eff.norm());
}

RiccatiSolution solve_filter_care(const FilterModel& fm, const ToleranceConfig& tol) {
  const Detectability det = pbh_detectable(fm.C, fm.omega_eff, tol);
  if (!det) {
    std::ostringstream os;
    os << "filter Riccati: (C, Omega_eff) is not detectable (mode lambda = " << det.eigenvalue
       << " is invisible in the measured current)";
    throw NotDetectableError(os.str());
  }
  // Dual form: A -> Omega^T, G -> C^T C, Q -> N.
  RiccatiSolution dual =
      solve_care(fm.omega_eff.transpose(), fm.C.transpose() * fm.C, fm.noise_eff, tol);
  RiccatiSolution out = std::move(dual);
  out.closed_loop = fm.A - (out.X * fm.C.transpose() + fm.Gamma.transpose()) * fm.C;
  out.closed_loop_eigs = eigenvalues(out.closed_loop);
  out.residual = filter_residual(fm, out.X);
  out.stabilizing = certify_stabilizing(out.closed_loop, tol);
  if (!out.stabilizing) throw NumericalError("filter Riccati: solution is not stabilizing");

  if (!is_psd(hermitian_embed(out.X, fm.hbar), tol)) {
    throw NumericalError("filter Riccati: W violates the uncertainty LMI W + i hbar Sigma/2 >= 0");
  }
  if (!is_psd(symmetrize(fm.D + fm.A * out.X + out.X * fm.A.transpose()), tol)) {
    throw NumericalError("filter Riccati: W violates D + A W + W A^T >= 0");
  }
  return out;
}

RiccatiSolution solve_control_care(const Matrix& a, const Matrix& b, const Matrix& p,
                                   const Matrix& q, const ToleranceConfig& tol) {
  if (b.rows() != a.rows() || q.rows() != b.cols() || q.cols() != b.cols() ||
      p.rows() != a.rows() || p.cols() != a.cols()) {
    throw ValidationError("control Riccati: dimension mismatch");
  }
  Eigen::LLT<Matrix> llt(symmetrize(q));
  if (q.size() == 0 || llt.info() != Eigen::Success) {
    throw ValidationError("control Riccati: Q is singular; use the Q -> 0 (full-rank B) pathway");
  }
  if (!pbh_detectable(b.transpose(), a.transpose(), tol)) {
    throw NotDetectableError("control Riccati: (B^T, A^T) is not detectable");
  }
  if (!pbh_detectable(p, a, tol)) {
    throw NotDetectableError("control Riccati: (P, A) is not detectable");
  }
  const Matrix g = b * llt.solve(b.transpose());
  return solve_care(a, g, p, tol);
}

bool certify_stabilizing(const Matrix& closed_loop, const ToleranceConfig& tol) {
  return spectral_abscissa(closed_loop) < -tol.stability_margin;
}

}  // namespace qlqg
