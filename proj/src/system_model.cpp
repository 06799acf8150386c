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

#include "qlqg/system_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qlqg/errors.hpp"

namespace qlqg {

ComplexMatrix SplitComplexMatrix::to_complex() const {
  ComplexMatrix out(re.rows(), re.cols());
  out.real() = re;
  out.imag() = im;
  return out;
}

SystemSpec validate_spec(SystemSpec spec, const ToleranceConfig& tol) {
  if (!(spec.hbar > 0.0) || !std::isfinite(spec.hbar)) {
    throw ValidationError("system: hbar must be positive");
  }
  if (spec.G.rows() == 0 || spec.G.rows() != spec.G.cols() || spec.G.rows() % 2 != 0) {
    throw ValidationError("system: G must be a non-empty 2N x 2N matrix");
  }
  const auto n2 = spec.G.rows();
  if (asymmetry(spec.G) > tol.residual_tol * (1.0 + spec.G.norm())) {
    std::ostringstream os;
    os << "system: G is not symmetric (||G - G^T|| = " << asymmetry(spec.G) << ")";
    throw ValidationError(os.str());
  }
  if (spec.c_tilde.re.rows() != spec.c_tilde.im.rows() ||
      spec.c_tilde.re.cols() != spec.c_tilde.im.cols()) {
    throw ValidationError("system: C_tilde real and imaginary parts differ in shape");
  }
  if (spec.c_tilde.rows() < 1 || spec.c_tilde.cols() != n2) {
    throw ValidationError("system: C_tilde must be L x 2N with L >= 1");
  }
  if (spec.B.size() != 0 && spec.B.rows() != n2) {
    throw ValidationError("system: B must have 2N rows");
  }
  const auto finite = [](const Matrix& m) { return m.allFinite(); };
  if (!finite(spec.G) || !finite(spec.c_tilde.re) || !finite(spec.c_tilde.im) || !finite(spec.B)) {
    throw ValidationError("system: non-finite matrix entry");
  }
  spec.G = symmetrize(spec.G);
  return spec;
}

MomentModel derive_moment_model(const SystemSpec& spec) {
  MomentModel out;
  out.hbar = spec.hbar;
  out.sigma = symplectic_form(spec.modes());
  const Matrix& re = spec.c_tilde.re;
  const Matrix& im = spec.c_tilde.im;
  // C~^dag C~ = (Re^T Re + Im^T Im) + i (Re^T Im - Im^T Re)
  const Matrix gram_re = re.transpose() * re + im.transpose() * im;
  const Matrix gram_im = re.transpose() * im - im.transpose() * re;
  out.A = out.sigma * (spec.G + gram_im);
  out.D = symmetrize(spec.hbar * out.sigma * gram_re * out.sigma.transpose());
  out.C_bar.resize(2 * re.rows(), re.cols());
  out.C_bar << re, im;
  return out;
}

Detectability pbh_detectable(const Matrix& c, const Matrix& a, const ToleranceConfig& tol) {
  if (a.rows() != a.cols() || c.cols() != a.cols()) {
    throw ValidationError("pbh_detectable: column counts of C and A differ");
  }
  Detectability out;
  const Eigen::Index n = a.rows();
  if (n == 0) return out;
  Eigen::EigenSolver<Matrix> es(a, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) throw NumericalError("pbh_detectable: eigensolver failed");
  const double scale = 1.0 + a.norm() + c.norm();
  const double threshold = std::sqrt(tol.psd_tol) * scale;
  ComplexMatrix stacked(n + c.rows(), n);
  stacked.bottomRows(c.rows()) = c.cast<std::complex<double>>();
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::complex<double> lambda = es.eigenvalues()(i);
    if (lambda.real() < -tol.stability_margin) continue;
    stacked.topRows(n) = lambda * ComplexMatrix::Identity(n, n) - a.cast<std::complex<double>>();
    Eigen::JacobiSVD<ComplexMatrix> svd(stacked, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    if (sv(n - 1) <= threshold) {
      out.detectable = false;
      out.eigenvalue = lambda;
      out.witness = svd.matrixV().col(n - 1);
      return out;
    }
  }
  return out;
}

namespace {

struct MomentRhs {
  const Matrix& a;
  const Matrix& b;
  const Matrix& d;

  void operator()(const Vector& x, const Matrix& v, const Vector& u, Vector& dx, Matrix& dv) const {
    dx = a * x;
    if (u.size() != 0) dx += b * u;
    dv = a * v + v * a.transpose() + d;
  }
};

}  // namespace

MomentTrajectory unconditional_evolution(const MomentModel& model, const Matrix& b,
                                         const std::vector<Vector>& inputs,
                                         const Vector& x0, const Matrix& v0,
                                         const std::vector<double>& t_grid,
                                         const ToleranceConfig& tol) {
  const Eigen::Index n = model.A.rows();
  if (x0.size() != n || v0.rows() != n || v0.cols() != n) {
    throw ValidationError("unconditional_evolution: initial moments have wrong dimension");
  }
  if (t_grid.empty()) throw ValidationError("unconditional_evolution: empty time grid");
  if (!std::is_sorted(t_grid.begin(), t_grid.end())) {
    throw ValidationError("unconditional_evolution: time grid must be non-decreasing");
  }
  if (!inputs.empty() && inputs.size() + 1 < t_grid.size()) {
    throw ValidationError("unconditional_evolution: need one input per grid interval");
  }
  if (asymmetry(v0) > tol.residual_tol * (1.0 + v0.norm())) {
    throw ValidationError("unconditional_evolution: V0 is not symmetric");
  }
  if (!is_psd(hermitian_embed(v0, model.hbar), tol)) {
    throw ValidationError("unconditional_evolution: V0 violates the uncertainty LMI");
  }

  MomentRhs rhs{model.A, b, model.D};
  MomentTrajectory out;
  out.times = t_grid;
  out.means.reserve(t_grid.size());
  out.covariances.reserve(t_grid.size());

  Vector x = x0;
  Matrix v = symmetrize(v0);
  out.means.push_back(x);
  out.covariances.push_back(v);
  const double a_norm = model.A.norm();
  const double max_step = a_norm > 0.0 ? 1e-3 / a_norm : std::numeric_limits<double>::infinity();

  Vector k1x, k2x, k3x, k4x;
  Matrix k1v, k2v, k3v, k4v;
  for (size_t k = 0; k + 1 < t_grid.size(); ++k) {
    const double span = t_grid[k + 1] - t_grid[k];
    const Vector u = inputs.empty() ? Vector() : inputs[k];
    if (span > 0.0) {
      const int steps = static_cast<int>(std::ceil(span / std::min(span, max_step) - 1e-12));
      const double h = span / steps;
      for (int s = 0; s < steps; ++s) {
        rhs(x, v, u, k1x, k1v);
        rhs(x + 0.5 * h * k1x, v + 0.5 * h * k1v, u, k2x, k2v);
        rhs(x + 0.5 * h * k2x, v + 0.5 * h * k2v, u, k3x, k3v);
        rhs(x + h * k3x, v + h * k3v, u, k4x, k4v);
        x += (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
        v += (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        v = symmetrize(v);
      }
    }
    if (!is_psd(hermitian_embed(v, model.hbar), tol)) {
      std::ostringstream os;
      os << "unconditional_evolution: uncertainty LMI violated at t = " << t_grid[k + 1];
      throw NumericalError(os.str());
    }
    out.means.push_back(x);
    out.covariances.push_back(v);
  }
  return out;
}

}  // namespace qlqg
