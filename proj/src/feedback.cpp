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

#include "qlqg/feedback.hpp"

#include <sstream>

#include "qlqg/errors.hpp"

namespace qlqg {

namespace {

Matrix filter_gain(const Matrix& w, const FilterModel& fm) {
  return w * fm.C.transpose() + fm.Gamma.transpose();
}

bool full_row_rank(const Matrix& b) {
  if (b.size() == 0 || b.cols() < b.rows()) return false;
  Eigen::FullPivLU<Matrix> lu(b);
  lu.setThreshold(1e-10);
  return lu.rank() == b.rows();
}

}  // namespace

ControlProblem validate_control(ControlProblem problem, const SystemSpec& spec,
                                const ToleranceConfig& tol) {
  const Eigen::Index n2 = 2 * spec.modes();
  if (problem.P.rows() != n2 || problem.P.cols() != n2) {
    throw ValidationError("control: P must be 2N x 2N");
  }
  if (!is_psd(problem.P, tol)) throw ValidationError("control: P is not PSD");
  problem.P = symmetrize(problem.P);
  if (problem.q_zero_limit) {
    if (!full_row_rank(spec.B)) throw ValidationError("Q->0 requires full-rank B");
    problem.Q = Matrix::Zero(spec.inputs(), spec.inputs());
    return problem;
  }
  if (problem.Q.rows() != spec.inputs() || problem.Q.cols() != spec.inputs() ||
      spec.inputs() == 0) {
    throw ValidationError("control: Q must be M x M with M the number of inputs in B");
  }
  if (!is_psd(problem.Q, tol)) throw ValidationError("control: Q is not PSD");
  problem.Q = symmetrize(problem.Q);
  return problem;
}

Matrix optimal_gain(const RiccatiSolution& y, const Matrix& b, const Matrix& q) {
  Eigen::LLT<Matrix> llt(symmetrize(q));
  if (q.size() == 0 || llt.info() != Eigen::Success) {
    throw ValidationError("optimal_gain: Q is singular");
  }
  return llt.solve(b.transpose() * y.X);
}

double optimal_cost(const RiccatiSolution& y, const Matrix& b, const Matrix& q,
                    const Matrix& d, const Matrix& w) {
  const Matrix k = optimal_gain(y, b, q);
  // Y B Q^{-1} B^T Y = K^T Q K
  const Matrix lambda = k.transpose() * symmetrize(q) * k;
  return (lambda * w).trace() + (y.X * d).trace();
}

double optimal_cost_q_zero(const Matrix& p, const Matrix& w) { return (p * w).trace(); }

MarkovianGain markovian_gain(const Matrix& w, const FilterModel& fm, const Matrix& b) {
  const Matrix target = -filter_gain(w, fm);
  if (b.rows() != target.rows()) throw ValidationError("markovian_gain: B has wrong row count");
  MarkovianGain out;
  if (b.rows() == b.cols()) {
    Eigen::FullPivLU<Matrix> lu(b);
    lu.setThreshold(1e-10);
    if (!lu.isInvertible()) throw ValidationError("markovian_gain: B is singular");
    out.F = lu.solve(target);
  } else if (full_row_rank(b)) {
    out.pseudo_inverse = true;
    out.F = b.transpose() * (b * b.transpose()).ldlt().solve(target);
  } else {
    throw ValidationError("markovian_gain: B is not full row rank");
  }
  out.cancellation_residual = (b * out.F - target).norm();
  return out;
}

ControllerDesign design_markovian(const Matrix& w, const FilterModel& fm, const Matrix& b,
                                  const Matrix& p, const ToleranceConfig& tol) {
  const MarkovianGain mg = markovian_gain(w, fm, b);
  ControllerDesign out;
  out.kind = ControllerKind::markovian;
  out.gain = mg.F;
  out.W = w;
  out.pseudo_inverse = mg.pseudo_inverse;
  out.cancellation_residual = mg.cancellation_residual;
  out.M_closed = fm.A + b * mg.F * fm.C;
  out.filter_closed = fm.A - filter_gain(w, fm) * fm.C;
  out.eigs = eigenvalues(out.M_closed);
  if (!certify_stabilizing(out.M_closed, tol)) {
    throw NumericalError("markovian design: closed-loop drift M is not strictly stable");
  }
  const Matrix diffusion = b * mg.F + filter_gain(w, fm);
  out.predicted_cost = optimal_cost_q_zero(p, w);
  if (mg.cancellation_residual > 1e-12 * (1.0 + filter_gain(w, fm).norm())) {
    // Residual noise drives an OU process for the conditional mean.
    const Matrix mean_cov =
        solve_lyapunov(out.M_closed, diffusion * diffusion.transpose(), tol);
    out.predicted_cost += (p * mean_cov).trace();
  }
  return out;
}

ControllerDesign design_optimal(const RiccatiSolution& y, const Matrix& w, const FilterModel& fm,
                                const Matrix& b, const Matrix& q, const ToleranceConfig& tol) {
  ControllerDesign out;
  out.kind = ControllerKind::optimal;
  out.gain = optimal_gain(y, b, q);
  out.W = w;
  out.M_closed = fm.A - b * out.gain;
  out.filter_closed = fm.A - filter_gain(w, fm) * fm.C;
  out.eigs = eigenvalues(out.M_closed);
  if (!certify_stabilizing(out.M_closed, tol)) {
    throw NumericalError("optimal design: A - B K is not strictly stable");
  }
  out.predicted_cost = optimal_cost(y, b, q, fm.D, w);
  return out;
}

ClosedLoop closed_loop_matrix(const ControllerDesign& design, const FilterModel& fm,
                              const Matrix& b) {
  ClosedLoop out;
  if (design.kind == ControllerKind::optimal) {
    out.mean_dynamics = fm.A - b * design.gain;
  } else {
    out.mean_dynamics = fm.A + b * design.gain * fm.C;
  }
  out.filter_error = fm.A - filter_gain(design.W, fm) * fm.C;
  out.mean_eigs = eigenvalues(out.mean_dynamics);
  out.filter_eigs = eigenvalues(out.filter_error);
  return out;
}

}  // namespace qlqg
