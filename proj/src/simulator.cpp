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

#include "qlqg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "qlqg/errors.hpp"

namespace qlqg {

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw ValidationError("simulate: dt must be positive");
  if (!(t_final >= 100.0 * dt)) throw ValidationError("simulate: t_final must be at least 100 dt");
  if (n_traj < 1) throw ValidationError("simulate: need at least one trajectory");
  if (!(burn_in_fraction >= 0.1 && burn_in_fraction <= 0.9)) {
    throw ValidationError("simulate: burn-in fraction must lie in [0.1, 0.9]");
  }
  if (record_stride < 1) throw ValidationError("simulate: record stride must be >= 1");
}

namespace {

Matrix riccati_flow(const FilterModel& fm, const Matrix& v) {
  const Matrix k = v * fm.C.transpose() + fm.Gamma.transpose();
  return fm.A * v + v * fm.A.transpose() + fm.D - k * k.transpose();
}

void to_row_major(const Matrix& m, double* dst) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) dst[i * m.cols() + j] = m(i, j);
}

std::mt19937_64 trajectory_stream(std::uint64_t seed, int trajectory) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trajectory)};
  return std::mt19937_64(seq);
}

}  // namespace

SimulationResult simulate_conditional(const MomentModel& model, const Matrix& b,
                                      const FilterModel& fm, const ControllerDesign* design,
                                      const Matrix& p, const Matrix& q, const SimConfig& cfg,
                                      const ToleranceConfig& tol) {
  cfg.validate();
  const int n = static_cast<int>(model.A.rows());
  const int m = static_cast<int>(fm.C.rows());
  const double hbar = model.hbar;
  if (n > simd::kMaxDim || m > simd::kMaxDim) {
    throw ValidationError("simulate: state or current dimension exceeds kernel limit");
  }
  if (p.rows() != n || p.cols() != n) throw ValidationError("simulate: P must be 2N x 2N");
  if (design != nullptr && design->kind == ControllerKind::optimal &&
      (q.rows() != design->gain.rows() || q.cols() != design->gain.rows())) {
    throw ValidationError("simulate: Q must match the input dimension");
  }

  const Vector x0 = cfg.x0.size() == 0 ? Vector::Zero(n) : cfg.x0;
  const Matrix v0 = cfg.V0.size() == 0 ? Matrix(hbar * Matrix::Identity(n, n)) : cfg.V0;
  if (x0.size() != n || v0.rows() != n || v0.cols() != n) {
    throw ValidationError("simulate: initial moments have wrong dimension");
  }
  if (!is_psd(hermitian_embed(v0, hbar), tol)) {
    throw ValidationError("simulate: V_c(0) violates the uncertainty LMI");
  }

  const long steps = std::lround(cfg.t_final / cfg.dt);
  const double dt = cfg.dt;
  const double sqrt_dt = std::sqrt(dt);
  const long burn_steps = static_cast<long>(std::floor(cfg.burn_in_fraction * steps));
  const long half_step = burn_steps + (steps - burn_steps) / 2;

  // Mean dynamics: dx = drift x dt + (L_t + extra) dw.
  Matrix drift = model.A;
  Matrix extra_gain = Matrix::Zero(n, m);
  Matrix state_cost = symmetrize(p);
  Matrix input_map;  // u = input_map x (+ input_noise dw/dt)
  Matrix input_noise;
  if (design != nullptr) {
    if (design->kind == ControllerKind::optimal) {
      drift = model.A - b * design->gain;
      input_map = -design->gain;
      state_cost += design->gain.transpose() * q * design->gain;
    } else {
      drift = model.A + b * design->gain * fm.C;
      extra_gain = b * design->gain;
      input_map = design->gain * fm.C;
      input_noise = design->gain;
      if (q.size() != 0) state_cost += input_map.transpose() * q * input_map;
    }
  }

  SimulationResult out;
  out.config = cfg;
  out.drift = drift;
  out.controlled = design != nullptr;

  // Deterministic V_c flow (RK4) and per-step noise gains.
  std::vector<double> gains(static_cast<size_t>(steps) * n * m);
  std::vector<double> vc_trace(static_cast<size_t>(steps));
  std::vector<long> snapshot_steps;
  for (long k = 0; k < steps; k += cfg.record_stride) snapshot_steps.push_back(k);
  if (snapshot_steps.back() != steps) snapshot_steps.push_back(steps);

  Matrix v = symmetrize(v0);
  size_t next_snapshot = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  for (long k = 0; k <= steps; ++k) {
    const Matrix embed = hermitian_embed(v, hbar);
    Eigen::SelfAdjointEigenSolver<Matrix> es(embed, Eigen::EigenvaluesOnly);
    const double margin = es.eigenvalues()(0);
    min_margin = std::min(min_margin, margin);
    if (margin < -10.0 * tol.psd_tol * (1.0 + embed.norm())) {
      std::ostringstream os;
      os << "simulate: V_c violates the uncertainty LMI at step " << k << " (min eigenvalue "
         << margin << ")";
      throw NumericalError(os.str());
    }
    if (next_snapshot < snapshot_steps.size() && snapshot_steps[next_snapshot] == k) {
      out.times.push_back(k * dt);
      out.Vc_path.push_back(v);
      ++next_snapshot;
    }
    if (k == steps) break;
    const Matrix gain = v * fm.C.transpose() + fm.Gamma.transpose() + extra_gain;
    to_row_major(gain, gains.data() + static_cast<size_t>(k) * n * m);
    vc_trace[static_cast<size_t>(k)] = (p * v).trace();

    const Matrix k1 = riccati_flow(fm, v);
    const Matrix k2 = riccati_flow(fm, v + 0.5 * dt * k1);
    const Matrix k3 = riccati_flow(fm, v + 0.5 * dt * k2);
    const Matrix k4 = riccati_flow(fm, v + dt * k3);
    v = symmetrize(v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
  }
  out.min_uncertainty_margin = min_margin;

  double vc_first = 0.0, vc_second = 0.0;
  for (long k = burn_steps; k < steps; ++k) {
    (k < half_step ? vc_first : vc_second) += vc_trace[static_cast<size_t>(k)];
  }
  const double n_first = static_cast<double>(half_step - burn_steps);
  const double n_second = static_cast<double>(steps - half_step);

  std::vector<double> transition(static_cast<size_t>(n) * n);
  std::vector<double> cost(static_cast<size_t>(n) * n);
  to_row_major(Matrix::Identity(n, n) + dt * drift, transition.data());
  to_row_major(state_cost, cost.data());

  const simd::StepKernel kernel = simd::kernel_for(cfg.kernel.value_or(simd::detect_isa()));
  constexpr int L = simd::kLanes;
  out.trajectories.resize(static_cast<size_t>(cfg.n_traj));
  const int n_blocks = (cfg.n_traj + L - 1) / L;

  std::vector<double> x(static_cast<size_t>(n) * L);
  std::vector<double> dw(static_cast<size_t>(m) * L);
  for (int blk = 0; blk < n_blocks; ++blk) {
    const int first = blk * L;
    const int active = std::min(L, cfg.n_traj - first);
    std::vector<std::mt19937_64> streams;
    std::vector<std::normal_distribution<double>> normals(static_cast<size_t>(active));
    for (int lane = 0; lane < active; ++lane) streams.push_back(trajectory_stream(cfg.seed, first + lane));
    for (int i = 0; i < n; ++i)
      for (int lane = 0; lane < L; ++lane) x[static_cast<size_t>(i * L + lane)] = x0(i);
    std::fill(dw.begin(), dw.end(), 0.0);
    double acc_first[L] = {0.0, 0.0, 0.0, 0.0};
    double acc_second[L] = {0.0, 0.0, 0.0, 0.0};

    size_t snap = 0;
    for (long k = 0; k <= steps; ++k) {
      const bool record = snap < snapshot_steps.size() && snapshot_steps[snap] == k;
      if (record) {
        for (int lane = 0; lane < active; ++lane) {
          Vector xv(n);
          for (int i = 0; i < n; ++i) xv(i) = x[static_cast<size_t>(i * L + lane)];
          out.trajectories[static_cast<size_t>(first + lane)].mean_path.push_back(std::move(xv));
        }
      }
      if (k == steps) break;
      for (int lane = 0; lane < active; ++lane) {
        auto& gen = streams[static_cast<size_t>(lane)];
        auto& nd = normals[static_cast<size_t>(lane)];
        for (int c = 0; c < m; ++c) dw[static_cast<size_t>(c * L + lane)] = sqrt_dt * nd(gen);
      }
      if (record) {
        for (int lane = 0; lane < active; ++lane) {
          auto& rec = out.trajectories[static_cast<size_t>(first + lane)];
          const Vector& xv = rec.mean_path.back();
          Vector noise(m);
          for (int c = 0; c < m; ++c) noise(c) = dw[static_cast<size_t>(c * L + lane)];
          const Vector y = fm.C * xv + noise / dt;
          rec.y_path.push_back(y);
          if (design != nullptr) {
            Vector u = input_map * xv;
            if (input_noise.size() != 0) u += input_noise * (noise / dt);
            rec.u_path.push_back(std::move(u));
          }
        }
        ++snap;
      }
      simd::StepMatrices mats;
      mats.n = n;
      mats.m = m;
      mats.transition = transition.data();
      mats.gain = gains.data() + static_cast<size_t>(k) * n * m;
      mats.cost = cost.data();
      double* acc = k < burn_steps ? nullptr : (k < half_step ? acc_first : acc_second);
      kernel(mats, x.data(), dw.data(), acc);
    }
    for (int lane = 0; lane < active; ++lane) {
      auto& rec = out.trajectories[static_cast<size_t>(first + lane)];
      rec.cost_first_half = (acc_first[lane] + vc_first) / n_first;
      rec.cost_second_half = (acc_second[lane] + vc_second) / n_second;
      rec.cost_accumulator = (acc_first[lane] + acc_second[lane] + vc_first + vc_second) /
                             (n_first + n_second);
    }
  }
  return out;
}

namespace {

// Pairwise summation, independent of how the trajectories were produced.
double pairwise_sum(const double* v, size_t count) {
  if (count <= 8) {
    double s = 0.0;
    for (size_t i = 0; i < count; ++i) s += v[i];
    return s;
  }
  const size_t half = count / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, count - half);
}

struct MeanAndError {
  double mean = 0.0;
  double standard_error = 0.0;
};

MeanAndError mean_and_error(const std::vector<double>& values) {
  MeanAndError out;
  const size_t count = values.size();
  if (count == 0) return out;
  out.mean = pairwise_sum(values.data(), count) / static_cast<double>(count);
  if (count < 2) return out;
  std::vector<double> sq(count);
  for (size_t i = 0; i < count; ++i) sq[i] = (values[i] - out.mean) * (values[i] - out.mean);
  const double var = pairwise_sum(sq.data(), count) / static_cast<double>(count - 1);
  out.standard_error = std::sqrt(var / static_cast<double>(count));
  return out;
}

}  // namespace

CostEstimate estimate_steady_cost(const SimulationResult& result) {
  CostEstimate out;
  const auto& trajs = result.trajectories;
  std::vector<double> total, diff;
  total.reserve(trajs.size());
  diff.reserve(trajs.size());
  for (const auto& t : trajs) {
    total.push_back(t.cost_accumulator);
    diff.push_back(t.cost_second_half - t.cost_first_half);
  }
  const MeanAndError m = mean_and_error(total);
  out.m_hat = m.mean;
  out.standard_error = m.standard_error;
  out.has_standard_error = trajs.size() >= 2;
  const MeanAndError d = mean_and_error(diff);
  const bool drifting = std::abs(d.mean) > 5.0 * d.standard_error + 1e-6 * (1.0 + std::abs(m.mean));
  out.nonstationary = drifting || spectral_abscissa(result.drift) >= 0.0;
  return out;
}

ConsistencyReport ensemble_consistency_check(const SimulationResult& result,
                                             const MomentModel& model,
                                             const std::vector<double>& times, double tol,
                                             double rel_tol) {
  if (result.controlled) throw ValidationError("consistency check: requires an uncontrolled run");
  if (result.trajectories.size() < 500) {
    throw ValidationError("consistency check: requires at least 500 trajectories");
  }
  const Eigen::Index n = model.A.rows();
  const SimConfig& cfg = result.config;
  const Vector x0 = cfg.x0.size() == 0 ? Vector::Zero(n) : cfg.x0;
  const Matrix v0 = cfg.V0.size() == 0 ? Matrix(model.hbar * Matrix::Identity(n, n)) : cfg.V0;

  std::vector<size_t> idx;
  std::vector<double> grid{0.0};
  for (double t : times) {
    const auto it = std::min_element(result.times.begin(), result.times.end(), [t](double a, double b) {
      return std::abs(a - t) < std::abs(b - t);
    });
    if (it == result.times.end() || std::abs(*it - t) > 0.5 * cfg.dt) {
      throw ValidationError("consistency check: requested time is not a snapshot time");
    }
    idx.push_back(static_cast<size_t>(it - result.times.begin()));
    grid.push_back(*it);
  }
  std::vector<double> sorted_grid = grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());
  const MomentTrajectory uncond =
      unconditional_evolution(model, Matrix(), {}, x0, v0, sorted_grid);

  ConsistencyReport out;
  out.pass = true;
  const size_t n_traj = result.trajectories.size();
  std::vector<double> samples(n_traj);
  for (size_t s = 0; s < idx.size(); ++s) {
    ConsistencyPoint pt;
    pt.t = result.times[idx[s]];
    const size_t u_idx =
        static_cast<size_t>(std::find(sorted_grid.begin(), sorted_grid.end(), grid[s + 1]) -
                            sorted_grid.begin());
    pt.unconditional = uncond.covariances[u_idx];
    const Vector& mu = uncond.means[u_idx];
    pt.total = result.Vc_path[idx[s]];
    pt.pass = true;
    const double v_scale = pt.unconditional.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        for (size_t tr = 0; tr < n_traj; ++tr) {
          const Vector& x = result.trajectories[tr].mean_path[idx[s]];
          samples[tr] = (x(i) - mu(i)) * (x(j) - mu(j));
        }
        const MeanAndError me = mean_and_error(samples);
        pt.total(i, j) += me.mean;
        const double dev = std::abs(pt.total(i, j) - pt.unconditional(i, j));
        pt.max_abs_deviation = std::max(pt.max_abs_deviation, dev);
        if (me.standard_error > 0.0) pt.max_z = std::max(pt.max_z, dev / me.standard_error);
        if (dev > std::max(3.0 * me.standard_error, tol)) pt.pass = false;
      }
    }
    pt.relative_deviation = v_scale > 0.0 ? pt.max_abs_deviation / v_scale : pt.max_abs_deviation;
    if (pt.relative_deviation > rel_tol) pt.pass = false;
    out.pass = out.pass && pt.pass;
    out.points.push_back(std::move(pt));
  }
  return out;
}

ComplexCurrentPath reconstruct_complex_current(const std::vector<Vector>& y_path, const Matrix& u,
                                               double hbar, const ToleranceConfig& tol) {
  ComplexCurrentPath out;
  const Matrix root = psd_sqrt(hbar * u, tol);
  const Eigen::Index l = u.rows() / 2;
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(u), Eigen::EigenvaluesOnly);
  out.lossy = es.eigenvalues()(0) <= tol.psd_tol * (1.0 + u.norm());
  out.J.reserve(y_path.size());
  for (const Vector& y : y_path) {
    if (y.size() != u.rows()) throw ValidationError("reconstruct_complex_current: y has wrong size");
    const Vector v = root * y;
    ComplexVector j(l);
    j.real() = v.head(l);
    j.imag() = v.tail(l);
    out.J.push_back(std::move(j));
  }
  return out;
}

}  // namespace qlqg
