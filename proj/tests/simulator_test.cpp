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

#include <gtest/gtest.h>

#include <cstring>

#include "qlqg/errors.hpp"
#include "qlqg/simulator.hpp"
#include "test_support.hpp"

namespace qlqg {
namespace {

// Plain reference for one lane: cost += x^T P x, then x <- T x + G dw.
void reference_step(int n, int m, const Matrix& t, const Matrix& g, const Matrix& p, Vector& x,
                    const Vector& dw, double& cost) {
  cost += x.dot(p * x);
  x = t * x + g.leftCols(m) * dw;
  (void)n;
}

TEST(EnsembleKernel, ScalarMatchesReference) {
  std::mt19937_64 rng(53);
  for (int n : {2, 4, 6}) {
    const int m = n;
    const Matrix t = Matrix::Identity(n, n) + 1e-3 * testing::random_matrix(rng, n, n);
    const Matrix g = testing::random_matrix(rng, n, m, 0.03);
    const Matrix p = testing::random_psd(rng, n, n);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tr = t, gr = g, pr = p;
    simd::StepMatrices mats{n, m, tr.data(), gr.data(), pr.data()};
    std::vector<double> x(n * simd::kLanes), dw(m * simd::kLanes);
    std::vector<Vector> xr(simd::kLanes, Vector::Zero(n));
    for (int l = 0; l < simd::kLanes; ++l) {
      xr[l] = testing::random_matrix(rng, n, 1);
      for (int i = 0; i < n; ++i) x[i * simd::kLanes + l] = xr[l](i);
    }
    double cost[simd::kLanes] = {0, 0, 0, 0};
    double cost_ref[simd::kLanes] = {0, 0, 0, 0};
    for (int step = 0; step < 100; ++step) {
      const Matrix noise = testing::random_matrix(rng, m, simd::kLanes);
      for (int l = 0; l < simd::kLanes; ++l)
        for (int i = 0; i < m; ++i) dw[i * simd::kLanes + l] = noise(i, l);
      simd::step_scalar(mats, x.data(), dw.data(), cost);
      for (int l = 0; l < simd::kLanes; ++l) {
        reference_step(n, m, t, g, p, xr[l], noise.col(l), cost_ref[l]);
      }
    }
    for (int l = 0; l < simd::kLanes; ++l) {
      for (int i = 0; i < n; ++i) EXPECT_NEAR(x[i * simd::kLanes + l], xr[l](i), 1e-12);
      EXPECT_NEAR(cost[l], cost_ref[l], 1e-10 * (1 + std::abs(cost_ref[l])));
    }
  }
}

TEST(EnsembleKernel, Avx2IsBitIdenticalToScalar) {
  if (!simd::isa_available(simd::Isa::avx2)) GTEST_SKIP() << "AVX2 not available";
  std::mt19937_64 rng(59);
  for (int n = 2; n <= simd::kMaxDim; n += 2) {
    for (int m = 2; m <= n; m += 2) {
      const Matrix t = Matrix::Identity(n, n) + 1e-3 * testing::random_matrix(rng, n, n);
      const Matrix g = testing::random_matrix(rng, n, m, 0.03);
      const Matrix p = testing::random_psd(rng, n, n);
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> tr = t, gr = g, pr = p;
      simd::StepMatrices mats{n, m, tr.data(), gr.data(), pr.data()};
      std::vector<double> xa(n * simd::kLanes), xb, dw(m * simd::kLanes);
      for (double& v : xa) v = std::normal_distribution<double>()(rng);
      xb = xa;
      double ca[simd::kLanes] = {0, 0, 0, 0}, cb[simd::kLanes] = {0, 0, 0, 0};
      for (int step = 0; step < 200; ++step) {
        for (double& v : dw) v = std::normal_distribution<double>(0, 0.03)(rng);
        simd::step_scalar(mats, xa.data(), dw.data(), ca);
        simd::step_avx2(mats, xb.data(), dw.data(), cb);
      }
      EXPECT_EQ(std::memcmp(xa.data(), xb.data(), xa.size() * sizeof(double)), 0) << n << "x" << m;
      EXPECT_EQ(std::memcmp(ca, cb, sizeof ca), 0) << n << "x" << m;
    }
  }
}

TEST(EnsembleKernel, DispatchNames) {
  EXPECT_EQ(simd::isa_name(simd::Isa::scalar), "scalar");
  EXPECT_TRUE(simd::isa_available(simd::Isa::scalar));
  EXPECT_TRUE(simd::isa_available(simd::detect_isa()));
  EXPECT_EQ(simd::kernel_for(simd::Isa::scalar), &simd::step_scalar);
}

struct ExampleRun {
  MomentModel model;
  FilterModel fm;
  Matrix b;
};

ExampleRun example_run(const UnravellingMatrix& u) {
  const SystemSpec s = testing::example_system();
  ExampleRun r{derive_moment_model(s), {}, s.B};
  r.fm = filter_model(r.model, u);
  return r;
}

SimConfig small_config(std::uint64_t seed) {
  SimConfig c;
  c.dt = 1e-3;
  c.t_final = 2.0;
  c.n_traj = 37;
  c.seed = seed;
  c.record_stride = 250;
  return c;
}

TEST(Simulator, DeterministicForSameSeed) {
  const ExampleRun ex = example_run(heterodyne(1));
  const Matrix p = testing::example_control().P;
  const SimulationResult a = simulate_conditional(ex.model, ex.b, ex.fm, nullptr, p, Matrix(), small_config(7));
  const SimulationResult b = simulate_conditional(ex.model, ex.b, ex.fm, nullptr, p, Matrix(), small_config(7));
  const SimulationResult c = simulate_conditional(ex.model, ex.b, ex.fm, nullptr, p, Matrix(), small_config(8));
  ASSERT_EQ(a.trajectories.size(), 37u);
  bool differs = false;
  for (size_t i = 0; i < a.trajectories.size(); ++i) {
    EXPECT_EQ(a.trajectories[i].mean_path.back(), b.trajectories[i].mean_path.back());
    EXPECT_EQ(a.trajectories[i].cost_accumulator, b.trajectories[i].cost_accumulator);
    differs = differs || a.trajectories[i].mean_path.back() != c.trajectories[i].mean_path.back();
  }
  EXPECT_TRUE(differs);
}

TEST(Simulator, KernelChoiceDoesNotChangeResults) {
  if (!simd::isa_available(simd::Isa::avx2)) GTEST_SKIP() << "AVX2 not available";
  const ExampleRun ex = example_run(homodyne(0.4));
  const Matrix p = testing::example_control().P;
  const Matrix w = solve_filter_care(ex.fm).X;
  const ControllerDesign d = design_markovian(w, ex.fm, ex.b, p);
  SimConfig ca = small_config(3), cb = small_config(3);
  ca.kernel = simd::Isa::scalar;
  cb.kernel = simd::Isa::avx2;
  const SimulationResult a = simulate_conditional(ex.model, ex.b, ex.fm, &d, p, Matrix::Zero(2, 2), ca);
  const SimulationResult b = simulate_conditional(ex.model, ex.b, ex.fm, &d, p, Matrix::Zero(2, 2), cb);
  for (size_t i = 0; i < a.trajectories.size(); ++i) {
    EXPECT_EQ(a.trajectories[i].mean_path, b.trajectories[i].mean_path);
    EXPECT_EQ(a.trajectories[i].cost_accumulator, b.trajectories[i].cost_accumulator);
  }
}

TEST(Simulator, CovarianceConvergesToFilterSolution) {
  const ExampleRun ex = example_run(heterodyne(1));
  SimConfig c = small_config(1);
  c.t_final = 15.0;
  c.n_traj = 4;
  const SimulationResult r = simulate_conditional(ex.model, ex.b, ex.fm, nullptr,
                                                  Matrix::Zero(2, 2), Matrix(), c);
  const Matrix w = solve_filter_care(ex.fm).X;
  EXPECT_LE((r.Vc_path.back() - w).norm(), 1e-8);
  EXPECT_GE(r.min_uncertainty_margin, -1e-8);
}

TEST(Simulator, MarkovianControlRemovesMeanNoise) {
  const ExampleRun ex = example_run(homodyne(0.7));
  const Matrix p = testing::example_control().P;
  const Matrix w = solve_filter_care(ex.fm).X;
  const ControllerDesign d = design_markovian(w, ex.fm, ex.b, p);
  SimConfig c = small_config(2);
  c.V0 = w;
  c.x0 = Vector::Zero(2);
  const SimulationResult r = simulate_conditional(ex.model, ex.b, ex.fm, &d, p, Matrix::Zero(2, 2), c);
  for (const TrajectoryRecord& t : r.trajectories) {
    EXPECT_LE(t.mean_path.back().norm(), 1e-12);
    EXPECT_NEAR(t.cost_accumulator, (p * w).trace(), 1e-9);
  }
  const CostEstimate est = estimate_steady_cost(r);
  EXPECT_NEAR(est.m_hat, (p * w).trace(), 1e-9);
  EXPECT_FALSE(est.nonstationary);
}

TEST(Simulator, RejectsBadConfig) {
  const ExampleRun ex = example_run(heterodyne(1));
  SimConfig c = small_config(1);
  c.dt = -1;
  EXPECT_THROW(simulate_conditional(ex.model, ex.b, ex.fm, nullptr, Matrix::Zero(2, 2), Matrix(), c),
               ValidationError);
  c = small_config(1);
  c.V0 = 0.1 * Matrix::Identity(2, 2);
  EXPECT_THROW(simulate_conditional(ex.model, ex.b, ex.fm, nullptr, Matrix::Zero(2, 2), Matrix(), c),
               ValidationError);
}

TEST(Simulator, ConsistencyCheckNeedsEnoughTrajectories) {
  const ExampleRun ex = example_run(heterodyne(1));
  const SimulationResult r = simulate_conditional(ex.model, ex.b, ex.fm, nullptr,
                                                  Matrix::Zero(2, 2), Matrix(), small_config(4));
  EXPECT_THROW(ensemble_consistency_check(r, ex.model, {1.0}, 1e-9), ValidationError);
}

TEST(Simulator, ComplexCurrentReconstruction) {
  const Matrix u = heterodyne(1).U;
  Vector y(2);
  y << 0.3, -0.8;
  const ComplexCurrentPath j = reconstruct_complex_current({y}, u, 2.0);
  ASSERT_EQ(j.J.size(), 1u);
  EXPECT_NEAR(j.J[0](0).real(), 0.3, 1e-14);
  EXPECT_NEAR(j.J[0](0).imag(), -0.8, 1e-14);
  EXPECT_FALSE(j.lossy);
  EXPECT_TRUE(reconstruct_complex_current({y}, homodyne(0).U, 1.0).lossy);
}

}  // namespace
}  // namespace qlqg
