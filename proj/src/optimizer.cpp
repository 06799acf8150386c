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

#include "qlqg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "qlqg/errors.hpp"

namespace qlqg {

CostWeight cost_weight(const RiccatiSolution& y, const Matrix& b, const Matrix& q,
                       const Matrix& d) {
  Eigen::LLT<Matrix> llt(symmetrize(q));
  if (q.size() == 0 || llt.info() != Eigen::Success) {
    throw ValidationError("cost_weight: Q is singular; set the Q -> 0 limit instead");
  }
  CostWeight out;
  out.lambda = symmetrize(y.X * b * llt.solve(b.transpose() * y.X));
  out.constant_term = (y.X * d).trace();
  return out;
}

CostWeight cost_weight_q_zero(const Matrix& p) {
  CostWeight out;
  out.lambda = symmetrize(p);
  out.constant_term = 0.0;
  return out;
}

namespace {

// Symmetric matrices parametrized by their upper triangle.
struct SymmetricBasis {
  Eigen::Index n = 0;
  std::vector<std::pair<Eigen::Index, Eigen::Index>> index;

  explicit SymmetricBasis(Eigen::Index dim) : n(dim) {
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) index.emplace_back(i, j);
  }
  Eigen::Index size() const { return static_cast<Eigen::Index>(index.size()); }

  Matrix element(Eigen::Index k) const {
    Matrix e = Matrix::Zero(n, n);
    const auto [i, j] = index[static_cast<size_t>(k)];
    e(i, j) = 1.0;
    e(j, i) = 1.0;
    return e;
  }
  Matrix to_matrix(const Vector& x) const {
    Matrix w(n, n);
    for (Eigen::Index k = 0; k < size(); ++k) {
      const auto [i, j] = index[static_cast<size_t>(k)];
      w(i, j) = x(k);
      w(j, i) = x(k);
    }
    return w;
  }
  Vector to_vector(const Matrix& w) const {
    Vector x(size());
    for (Eigen::Index k = 0; k < size(); ++k) {
      const auto [i, j] = index[static_cast<size_t>(k)];
      x(k) = 0.5 * (w(i, j) + w(j, i));
    }
    return x;
  }
};

struct BarrierEval {
  bool feasible = false;
  double value = 0.0;
  double log_det = 0.0;  // log det F1 + log det F2
  Vector grad;
  Matrix hess;
};

class LogDetBarrier {
 public:
  LogDetBarrier(const CostWeight& weight, const MomentModel& model)
      : model_(model), basis_(model.A.rows()) {
    c_.resize(basis_.size());
    for (Eigen::Index k = 0; k < basis_.size(); ++k) {
      const Matrix e = basis_.element(k);
      c_(k) = (weight.lambda * e).trace();
      e1_.push_back(blockdiag(e));
      e2_.push_back(model.A * e + e * model.A.transpose());
    }
  }

  const SymmetricBasis& basis() const { return basis_; }
  const Vector& objective() const { return c_; }
  Eigen::Index total_dimension() const { return 3 * basis_.n; }

  Matrix lmi_uncertainty(const Matrix& w) const { return hermitian_embed(w, model_.hbar); }
  Matrix lmi_evolution(const Matrix& w) const {
    return symmetrize(model_.D + model_.A * w + w * model_.A.transpose());
  }

  // value = t c^T x - log det F1 - log det F2, with derivatives if requested.
  BarrierEval evaluate(const Vector& x, double t, bool derivatives) const {
    BarrierEval out;
    const Matrix w = basis_.to_matrix(x);
    const Matrix f1 = lmi_uncertainty(w);
    const Matrix f2 = lmi_evolution(w);
    Eigen::LLT<Matrix> l1(f1), l2(f2);
    if (l1.info() != Eigen::Success || l2.info() != Eigen::Success) return out;
    const auto logdet = [](const Eigen::LLT<Matrix>& l) {
      return 2.0 * l.matrixLLT().diagonal().array().log().sum();
    };
    const double ld1 = logdet(l1);
    const double ld2 = logdet(l2);
    if (!std::isfinite(ld1) || !std::isfinite(ld2)) return out;
    out.feasible = true;
    out.log_det = ld1 + ld2;
    out.value = t * c_.dot(x) - out.log_det;
    if (!derivatives) return out;

    const Eigen::Index m = basis_.size();
    const Matrix f1_inv = l1.solve(Matrix::Identity(f1.rows(), f1.cols()));
    const Matrix f2_inv = l2.solve(Matrix::Identity(f2.rows(), f2.cols()));
    std::vector<Matrix> b1(static_cast<size_t>(m)), b2(static_cast<size_t>(m));
    out.grad.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      b1[static_cast<size_t>(k)] = f1_inv * e1_[static_cast<size_t>(k)];
      b2[static_cast<size_t>(k)] = f2_inv * e2_[static_cast<size_t>(k)];
      out.grad(k) = t * c_(k) - b1[static_cast<size_t>(k)].trace() -
                    b2[static_cast<size_t>(k)].trace();
    }
    out.hess.resize(m, m);
    for (Eigen::Index k = 0; k < m; ++k) {
      for (Eigen::Index l = k; l < m; ++l) {
        const auto ku = static_cast<size_t>(k), lu = static_cast<size_t>(l);
        const double h = (b1[ku].array() * b1[lu].transpose().array()).sum() +
                         (b2[ku].array() * b2[lu].transpose().array()).sum();
        out.hess(k, l) = h;
        out.hess(l, k) = h;
      }
    }
    return out;
  }

 private:
  static Matrix blockdiag(const Matrix& e) {
    const Eigen::Index n = e.rows();
    Matrix out = Matrix::Zero(2 * n, 2 * n);
    out.topLeftCorner(n, n) = e;
    out.bottomRightCorner(n, n) = e;
    return out;
  }

  const MomentModel& model_;
  SymmetricBasis basis_;
  Vector c_;
  std::vector<Matrix> e1_;
  std::vector<Matrix> e2_;
};

bool strictly_feasible(const Matrix& w, const MomentModel& model) {
  Eigen::LLT<Matrix> l1(hermitian_embed(w, model.hbar));
  Eigen::LLT<Matrix> l2(symmetrize(model.D + model.A * w + w * model.A.transpose()));
  return l1.info() == Eigen::Success && l2.info() == Eigen::Success;
}

double min_eig(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

UnravellingMatrix uniform_homodyne(int channels, double phi) {
  UnravellingMatrix u;
  u.theta = Vector::Ones(channels);
  u.upsilon.re = std::cos(2.0 * phi) * Matrix::Identity(channels, channels);
  u.upsilon.im = std::sin(2.0 * phi) * Matrix::Identity(channels, channels);
  return compose_u(u.theta, u.upsilon);
}

}  // namespace

Matrix strictly_feasible_start(const MomentModel& model, const ToleranceConfig& tol) {
  if (!pbh_detectable(model.C_bar, model.A, tol)) {
    throw NotDetectableError("optimizer: (C_bar, A) is not detectable; no unravelling is stabilizing");
  }
  const Eigen::Index n = model.A.rows();
  const int l = model.channels();
  const double hbar = model.hbar;
  Matrix sum = solve_filter_care(filter_model(model, heterodyne(l), tol), tol).X;
  int count = 1;
  const auto evolution_margin = [&](const Matrix& w) {
    return min_eig(model.D + model.A * w + w * model.A.transpose());
  };
  constexpr int kPhases = 8;
  for (int k = 0; k < kPhases && evolution_margin(sum / count) <= 1e-6 * hbar; ++k) {
    const double phi = std::numbers::pi * k / kPhases;
    try {
      sum += solve_filter_care(filter_model(model, uniform_homodyne(l, phi), tol), tol).X;
      ++count;
    } catch (const std::runtime_error&) {
      // Undetectable at this phase; try the next one.
    }
  }
  const Matrix base = symmetrize(sum / count);
  const double margin2 = evolution_margin(base);
  if (!(margin2 > 0.0)) {
    throw NumericalError("optimizer: could not construct a strictly feasible starting covariance");
  }
  const double a_sym = std::max(1e-300, (model.A + model.A.transpose()).norm());
  double delta = std::min(1e-6 * hbar, 0.5 * margin2 / a_sym);
  for (int it = 0; it < 60; ++it) {
    const Matrix w = base + delta * Matrix::Identity(n, n);
    if (strictly_feasible(w, model)) return w;
    delta *= 0.5;
  }
  throw NumericalError("optimizer: starting covariance is not strictly feasible");
}

OptimizationResult solve_sdp(const CostWeight& weight, const MomentModel& model,
                             const ToleranceConfig& tol, const SdpOptions& options) {
  const Eigen::Index n = model.A.rows();
  if (weight.lambda.rows() != n || weight.lambda.cols() != n) {
    throw ValidationError("solve_sdp: cost weight has wrong dimension");
  }
  if (!is_psd(weight.lambda, tol)) throw ValidationError("solve_sdp: cost weight is not PSD");

  LogDetBarrier barrier(weight, model);
  const SymmetricBasis& basis = barrier.basis();
  Vector x = basis.to_vector(strictly_feasible_start(model, tol));
  if (!barrier.evaluate(x, 1.0, false).feasible) {
    throw NumericalError("solve_sdp: infeasible start");
  }

  OptimizationResult out;
  out.weight = weight;
  // Scale the first barrier weight to the objective at the start so the
  // initial centring does not have to cross a large cost gap.
  const double cost0 = weight.lambda.cwiseProduct(basis.to_matrix(x)).sum();
  double mu = options.mu0 * std::max(1.0, std::abs(cost0) /
                                              static_cast<double>(barrier.total_dimension()));
  const Vector& c = barrier.objective();
  for (int stage = 0; stage < 96; ++stage) {
    const double t = 1.0 / mu;
    for (int it = 0; it < options.max_newton_per_stage; ++it) {
      const BarrierEval ev = barrier.evaluate(x, t, true);
      const Eigen::LDLT<Matrix> ldlt(ev.hess);
      const Vector dx = ldlt.solve(-ev.grad);
      const double decrement = -ev.grad.dot(dx);
      ++out.newton_steps;
      if (!dx.allFinite() || decrement <= 1e-12) break;
      double alpha = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 80; ++ls) {
        const Vector trial = x + alpha * dx;
        const BarrierEval tv = barrier.evaluate(trial, t, false);
        // Change in the barrier value, formed without cancelling large terms.
        const double change = tv.feasible ? alpha * t * c.dot(dx) - (tv.log_det - ev.log_det)
                                          : std::numeric_limits<double>::infinity();
        if (change <= -0.25 * alpha * decrement) {
          x = trial;
          moved = true;
          break;
        }
        alpha *= 0.5;
      }
      if (!moved) break;
      if (decrement <= 1e-10) break;
    }
    const double cost = weight.lambda.cwiseProduct(basis.to_matrix(x)).sum();
    if (mu <= options.final_mu_rel * (1.0 + std::abs(cost))) break;
    mu /= options.mu_factor;
  }

  out.W_star = basis.to_matrix(x);
  out.m_star = (weight.lambda * out.W_star).trace() + weight.constant_term;
  out.lmi_residuals = lmi_margins(out.W_star, model);
  out.barrier_mu_final = mu;
  out.gap_bound = mu * static_cast<double>(barrier.total_dimension());
  return out;
}

namespace {

struct OracleEvaluator {
  const MomentModel& model;
  const CostWeight& weight;
  const ToleranceConfig& tol;
  int evaluated = 0;
  int skipped = 0;

  std::optional<double> cost(double theta, double r, double phi) {
    ++evaluated;
    try {
      const UnravellingMatrix u = single_channel(theta, r, phi, tol);
      const RiccatiSolution w = solve_filter_care(filter_model(model, u, tol), tol);
      return (weight.lambda * w.X).trace() + weight.constant_term;
    } catch (const std::runtime_error&) {
      ++skipped;
      return std::nullopt;
    }
  }
};

struct Candidate {
  double cost = std::numeric_limits<double>::infinity();
  double theta = 1.0;
  double r = 1.0;
  double phi = 0.0;

  bool better_than(const Candidate& other) const {
    if (cost != other.cost) return cost < other.cost;
    return phi < other.phi;
  }
};

// Golden-section minimization of f on [lo, hi]; returns (argmin, min).
template <typename F>
std::pair<double, double> golden_section(F&& f, double lo, double hi, int iterations) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iterations; ++i) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  return fc <= fd ? std::make_pair(c, fc) : std::make_pair(d, fd);
}

}  // namespace

OracleResult grid_oracle(const MomentModel& model, const CostWeight& weight, double resolution,
                         const ToleranceConfig& tol) {
  if (model.modes() != 1 || model.channels() != 1) {
    throw ValidationError("grid_oracle: only defined for N = L = 1");
  }
  if (!(resolution > 0.0) || resolution > std::numbers::pi) {
    throw ValidationError("grid_oracle: resolution must be in (0, pi]");
  }
  OracleEvaluator eval{model, weight, tol};
  OracleResult out;
  const int n_phi = static_cast<int>(std::ceil(std::numbers::pi / resolution - 1e-9));

  std::vector<std::pair<double, double>> families;  // (theta, r)
  families.emplace_back(1.0, 1.0);
  for (double th : {0.25, 0.5, 0.75}) families.emplace_back(th, 1.0);
  for (int k = 0; k < 10; ++k) families.emplace_back(1.0, 0.1 * k);

  Candidate best;
  for (const auto& [theta, r] : families) {
    // r = 0 is phase independent.
    const int count = r == 0.0 ? 1 : n_phi;
    for (int i = 0; i < count; ++i) {
      const double phi = i * resolution;
      const auto c = eval.cost(theta, r, phi);
      if (theta == 1.0 && r == 1.0) {
        out.homodyne_sweep.push_back({theta, r, phi, c.value_or(std::nan("")), c.has_value()});
      }
      if (!c) continue;
      const Candidate cand{*c, theta, r, phi};
      if (cand.better_than(best)) best = cand;
    }
  }
  if (!std::isfinite(best.cost)) {
    throw NumericalError("grid_oracle: no grid point produced a stabilizing filter");
  }

  // Local refinement around the best grid point.
  const auto cost_or_inf = [&](double theta, double r, double phi) {
    return eval.cost(theta, r, phi).value_or(std::numeric_limits<double>::infinity());
  };
  for (int round = 0; round < 4 && best.r > 0.0; ++round) {
    const auto [phi, c_phi] = golden_section(
        [&](double p) { return cost_or_inf(best.theta, best.r, p); }, best.phi - resolution,
        best.phi + resolution, 40);
    if (c_phi < best.cost) {
      best.cost = c_phi;
      best.phi = phi;
    }
    if (best.theta == 1.0) {
      const auto [r, c_r] = golden_section(
          [&](double rr) { return cost_or_inf(1.0, rr, best.phi); }, std::max(0.0, best.r - 0.1),
          std::min(1.0, best.r + 0.1), 40);
      if (c_r < best.cost) {
        best.cost = c_r;
        best.r = r;
      }
      // The boundary r = 1 itself is never an interior golden-section probe.
      const double c_edge = cost_or_inf(1.0, 1.0, best.phi);
      if (c_edge < best.cost) {
        best.cost = c_edge;
        best.r = 1.0;
      }
    }
  }

  best.phi = std::fmod(std::fmod(best.phi, std::numbers::pi) + std::numbers::pi, std::numbers::pi);
  out.m_best = best.cost;
  out.theta_best = best.theta;
  out.r_best = best.r;
  out.phi_best = best.phi;
  out.U_best = single_channel(best.theta, best.r, best.phi, tol);
  out.evaluated = eval.evaluated;
  out.skipped = eval.skipped;
  return out;
}

OptimizationResult optimize_unravelling(const SystemSpec& spec, const MomentModel& model,
                                        const ControlProblem& control,
                                        const ToleranceConfig& tol) {
  if (!pbh_detectable(model.C_bar, model.A, tol)) {
    throw NotDetectableError("optimize: (C_bar, A) is not detectable; no unravelling is stabilizing");
  }
  const ControlProblem problem = validate_control(control, spec, tol);
  CostWeight weight;
  std::optional<RiccatiSolution> y;
  if (problem.q_zero_limit) {
    weight = cost_weight_q_zero(problem.P);
  } else {
    y = solve_control_care(model.A, spec.B, problem.P, problem.Q, tol);
    weight = cost_weight(*y, spec.B, problem.Q, model.D);
  }

  OptimizationResult out = solve_sdp(weight, model, tol);
  out.control_riccati = y;

  constexpr double kVerifyTol = 1e-6;
  const UnravellingRecovery rec = recover_u(out.W_star, model, tol, kVerifyTol);
  out.U_star = rec.unravelling;
  out.recover_residual = rec.residual;
  out.recover_flagged = rec.flagged;

  out.verified_filter = solve_filter_care(filter_model(model, rec.unravelling, tol), tol);
  out.verification_mismatch =
      (out.verified_filter->X - out.W_star).norm() / (1.0 + out.W_star.norm());
  if (out.verification_mismatch > kVerifyTol) {
    std::ostringstream os;
    os << "optimize: filter Riccati at the recovered unravelling does not reproduce W*\n"
       << "W* =\n" << out.W_star << "\nW(U*) =\n" << out.verified_filter->X;
    throw NumericalError(os.str());
  }
  return out;
}

}  // namespace qlqg
