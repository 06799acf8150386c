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

#include "qlqg/unravelling.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qlqg/errors.hpp"

namespace qlqg {

namespace {

constexpr double kThetaOffDiagonalTol = 1e-8;

Matrix assemble_u(const Vector& theta, const Matrix& re_y, const Matrix& im_y) {
  const Eigen::Index l = theta.size();
  Matrix u(2 * l, 2 * l);
  const Matrix th = theta.asDiagonal();
  u << th + re_y, im_y, im_y, th - re_y;
  return 0.5 * u;
}

// Frobenius projection of a symmetric matrix onto the (Theta diagonal in
// [0,1], Upsilon symmetric) parametrization.
Matrix project_structure(const Matrix& x) {
  const Eigen::Index l = x.rows() / 2;
  const Matrix x11 = x.topLeftCorner(l, l);
  const Matrix x22 = x.bottomRightCorner(l, l);
  const Matrix x12 = symmetrize(x.topRightCorner(l, l));
  const Vector theta = (x11 + x22).diagonal().cwiseMax(0.0).cwiseMin(1.0);
  return assemble_u(theta, symmetrize(x11 - x22), 2.0 * x12);
}

Matrix project_psd(const Matrix& x) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(x));
  const Vector ev = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose());
}

// Alternating projections between the PSD cone and the admissible
// parametrization; ends on the structural set so Theta is exactly diagonal.
Matrix project_admissible(const Matrix& candidate) {
  Matrix u = project_structure(symmetrize(candidate));
  for (int it = 0; it < 200; ++it) {
    const Matrix next = project_structure(project_psd(u));
    const double change = (next - u).norm();
    u = next;
    if (change < 1e-15 * (1.0 + u.norm())) break;
  }
  return u;
}

UnravellingMatrix split(const Matrix& u) {
  const Eigen::Index l = u.rows() / 2;
  UnravellingMatrix out;
  out.U = u;
  out.theta = (u.topLeftCorner(l, l) + u.bottomRightCorner(l, l)).diagonal();
  out.upsilon.re = u.topLeftCorner(l, l) - u.bottomRightCorner(l, l);
  out.upsilon.im = 2.0 * u.topRightCorner(l, l);
  return out;
}

}  // namespace

UnravellingMatrix compose_u(const Vector& theta, const SplitComplexMatrix& upsilon,
                            const ToleranceConfig& tol) {
  const Eigen::Index l = theta.size();
  if (l < 1) throw ValidationError("invalid unravelling: no channels");
  if (upsilon.re.rows() != l || upsilon.re.cols() != l || upsilon.im.rows() != l ||
      upsilon.im.cols() != l) {
    throw ValidationError("invalid unravelling: Upsilon must be L x L");
  }
  for (Eigen::Index i = 0; i < l; ++i) {
    if (!(theta(i) >= 0.0 && theta(i) <= 1.0)) {
      std::ostringstream os;
      os << "invalid unravelling: efficiency theta_" << i + 1 << " = " << theta(i)
         << " outside [0, 1]";
      throw ValidationError(os.str());
    }
  }
  const double asym = asymmetry(upsilon.re) + asymmetry(upsilon.im);
  if (asym > kThetaOffDiagonalTol) {
    std::ostringstream os;
    os << "invalid unravelling: Upsilon is not symmetric (asymmetry " << asym << ")";
    throw ValidationError(os.str());
  }
  UnravellingMatrix out;
  out.theta = theta;
  out.upsilon.re = symmetrize(upsilon.re);
  out.upsilon.im = symmetrize(upsilon.im);
  out.U = assemble_u(theta, out.upsilon.re, out.upsilon.im);
  if (!is_psd(out.U, tol)) {
    throw ValidationError("invalid unravelling: |Upsilon| too large for Theta (U not PSD)");
  }
  return out;
}

UnravellingMatrix decompose_u(const Matrix& u, const ToleranceConfig& tol) {
  if (u.rows() != u.cols() || u.rows() % 2 != 0 || u.rows() == 0) {
    throw ValidationError("invalid unravelling: U must be 2L x 2L");
  }
  const double asym = asymmetry(u);
  if (asym > tol.residual_tol * (1.0 + u.norm())) {
    std::ostringstream os;
    os << "invalid unravelling: U is not symmetric (asymmetry " << asym << ")";
    throw ValidationError(os.str());
  }
  const Eigen::Index l = u.rows() / 2;
  const Matrix theta_block = u.topLeftCorner(l, l) + u.bottomRightCorner(l, l);
  const Matrix off = theta_block - Matrix(theta_block.diagonal().asDiagonal());
  if (off.cwiseAbs().maxCoeff() > kThetaOffDiagonalTol) {
    throw ValidationError("invalid unravelling: Theta is not diagonal");
  }
  const double slack = tol.psd_tol;
  for (Eigen::Index i = 0; i < l; ++i) {
    const double th = theta_block(i, i);
    if (th < -slack || th > 1.0 + slack) {
      std::ostringstream os;
      os << "invalid unravelling: efficiency theta_" << i + 1 << " = " << th << " outside [0, 1]";
      throw ValidationError(os.str());
    }
  }
  if (asymmetry(u.topRightCorner(l, l)) > kThetaOffDiagonalTol) {
    throw ValidationError("invalid unravelling: Upsilon is not symmetric");
  }
  if (!is_psd(u, tol)) throw ValidationError("invalid unravelling: U is not PSD");
  UnravellingMatrix out = split(symmetrize(u));
  out.theta = out.theta.cwiseMax(0.0).cwiseMin(1.0);
  return out;
}

UnravellingMatrix heterodyne(int n_channels) {
  UnravellingMatrix out;
  out.theta = Vector::Ones(n_channels);
  out.upsilon.re = Matrix::Zero(n_channels, n_channels);
  out.upsilon.im = Matrix::Zero(n_channels, n_channels);
  out.U = 0.5 * Matrix::Identity(2 * n_channels, 2 * n_channels);
  return out;
}

UnravellingMatrix single_channel(double theta, double r, double phi, const ToleranceConfig& tol) {
  Vector th(1);
  th << theta;
  SplitComplexMatrix y;
  y.re = Matrix::Constant(1, 1, theta * r * std::cos(2.0 * phi));
  y.im = Matrix::Constant(1, 1, theta * r * std::sin(2.0 * phi));
  return compose_u(th, y, tol);
}

FilterModel filter_model(const MomentModel& model, const UnravellingMatrix& u,
                         const ToleranceConfig& tol, GammaSign sign) {
  const int l = model.channels();
  if (u.U.rows() != 2 * l || u.U.cols() != 2 * l) {
    throw ValidationError("filter_model: unravelling dimension does not match channel count");
  }
  const double hbar = model.hbar;
  const Matrix root_u = psd_sqrt(u.U, tol);
  const Matrix s = involution_s(l);
  FilterModel fm;
  fm.hbar = hbar;
  fm.A = model.A;
  fm.D = model.D;
  fm.C = (2.0 / std::sqrt(hbar)) * root_u * model.C_bar;
  fm.Gamma = -std::sqrt(hbar) * root_u * s * model.C_bar * model.sigma.transpose();
  if (sign == GammaSign::flipped) fm.Gamma = -fm.Gamma;
  fm.omega_eff = model.A - fm.Gamma.transpose() * fm.C;
  fm.noise_eff = symmetrize(model.D - fm.Gamma.transpose() * fm.Gamma);
  if (!is_psd(fm.noise_eff, tol)) {
    throw NumericalError("filter_model: effective diffusion D - Gamma^T Gamma is not PSD");
  }
  return fm;
}

Matrix recovery_factor(const Matrix& w, const MomentModel& model) {
  const Matrix s = involution_s(model.channels());
  return (2.0 / model.hbar) * model.C_bar * w + s * model.C_bar * model.sigma;
}

LmiMargins lmi_margins(const Matrix& w, const MomentModel& model) {
  LmiMargins out;
  Eigen::SelfAdjointEigenSolver<Matrix> e1(symmetrize(hermitian_embed(w, model.hbar)),
                                           Eigen::EigenvaluesOnly);
  out.uncertainty = e1.eigenvalues()(0);
  const Matrix t = symmetrize(model.D + model.A * w + w * model.A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> e2(t, Eigen::EigenvaluesOnly);
  out.evolution = e2.eigenvalues()(0);
  return out;
}

bool satisfies_lmis(const Matrix& w, const MomentModel& model, const ToleranceConfig& tol) {
  const LmiMargins m = lmi_margins(w, model);
  const double s1 = 1.0 + hermitian_embed(w, model.hbar).norm();
  const double s2 = 1.0 + (model.D + model.A * w + w * model.A.transpose()).norm();
  return m.uncertainty >= -tol.psd_tol * s1 && m.evolution >= -tol.psd_tol * s2;
}

UnravellingRecovery recover_u(const Matrix& w, const MomentModel& model,
                              const ToleranceConfig& tol, double flag_tol) {
  const Eigen::Index n2 = model.A.rows();
  if (w.rows() != n2 || w.cols() != n2) throw ValidationError("recover_u: W has wrong dimension");
  if (asymmetry(w) > tol.residual_tol * (1.0 + w.norm())) {
    throw ValidationError("recover_u: W is not symmetric");
  }
  if (!satisfies_lmis(w, model, tol)) {
    throw ValidationError("recover_u: W violates a covariance LMI (precondition)");
  }
  if (flag_tol <= 0.0) flag_tol = tol.residual_tol;
  const int l = model.channels();
  const double hbar = model.hbar;
  const Matrix ws = symmetrize(w);
  const Matrix target = symmetrize(model.D + model.A * ws + ws * model.A.transpose());
  const Matrix r = recovery_factor(ws, model);

  UnravellingRecovery out;
  Matrix candidate;
  if (r.rows() == r.cols()) {
    Eigen::FullPivLU<Matrix> lu(r);
    lu.setThreshold(1e-10);
    if (lu.isInvertible()) {
      const Matrix r_inv = lu.inverse();
      candidate = symmetrize(r_inv.transpose() * target * r_inv / hbar);
      const Matrix th = candidate.topLeftCorner(l, l) + candidate.bottomRightCorner(l, l);
      const double off = (th - Matrix(th.diagonal().asDiagonal())).cwiseAbs().maxCoeff();
      out.exact_inverse = off <= kThetaOffDiagonalTol;
      if (!out.exact_inverse) candidate.resize(0, 0);
    }
  }
  if (candidate.size() == 0) {
    // Least squares over p = (theta, upper(Re Y), upper(Im Y)).
    std::vector<std::pair<int, int>> upper;
    for (int i = 0; i < l; ++i)
      for (int j = i; j < l; ++j) upper.emplace_back(i, j);
    const Eigen::Index n_params = l + 2 * static_cast<Eigen::Index>(upper.size());
    const Eigen::Index n_eq = n2 * (n2 + 1) / 2;
    Matrix design(n_eq, n_params);
    Vector rhs(n_eq);
    const auto row_of = [&](const Matrix& m, Vector& dst) {
      Eigen::Index k = 0;
      for (Eigen::Index i = 0; i < n2; ++i)
        for (Eigen::Index j = i; j < n2; ++j) dst(k++) = (i == j ? 1.0 : std::sqrt(2.0)) * m(i, j);
    };
    row_of(target, rhs);
    Vector col(n_eq);
    for (Eigen::Index p = 0; p < n_params; ++p) {
      Vector th = Vector::Zero(l);
      Matrix re = Matrix::Zero(l, l), im = Matrix::Zero(l, l);
      if (p < l) {
        th(p) = 1.0;
      } else {
        const Eigen::Index q = p - l;
        const bool is_im = q >= static_cast<Eigen::Index>(upper.size());
        const auto [i, j] = upper[static_cast<size_t>(is_im ? q - upper.size() : q)];
        Matrix& dst = is_im ? im : re;
        dst(i, j) = 1.0;
        dst(j, i) = 1.0;
      }
      const Matrix basis = assemble_u(th, re, im);
      row_of(hbar * r.transpose() * basis * r, col);
      design.col(p) = col;
    }
    const Vector params = design.completeOrthogonalDecomposition().solve(rhs);
    Vector th = params.head(l);
    Matrix re = Matrix::Zero(l, l), im = Matrix::Zero(l, l);
    for (size_t k = 0; k < upper.size(); ++k) {
      const auto [i, j] = upper[k];
      re(i, j) = re(j, i) = params(l + static_cast<Eigen::Index>(k));
      im(i, j) = im(j, i) = params(l + static_cast<Eigen::Index>(upper.size() + k));
    }
    candidate = assemble_u(th, re, im);
  }

  const Matrix u = project_admissible(candidate);
  out.unravelling = split(u);
  out.residual = (hbar * r.transpose() * u * r - target).norm() / (1.0 + model.D.norm());
  out.flagged = out.residual > flag_tol;
  return out;
}

}  // namespace qlqg
