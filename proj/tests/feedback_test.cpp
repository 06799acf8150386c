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

#include "qlqg/errors.hpp"
#include "qlqg/feedback.hpp"
#include "test_support.hpp"

namespace qlqg {
namespace {

TEST(Feedback, QZeroRequiresFullRankB) {
  SystemSpec s = testing::example_system();
  s.B = Matrix(2, 0);
  try {
    validate_control(testing::example_control(), s);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("Q->0 requires full-rank B"), std::string::npos);
  }
  s.B = Matrix::Zero(2, 1);
  s.B(0, 0) = 1;
  EXPECT_THROW(validate_control(testing::example_control(), s), ValidationError);
}

TEST(Feedback, RejectsIndefiniteWeights) {
  ControlProblem c = testing::example_control();
  c.P(0, 0) = -1;
  EXPECT_THROW(validate_control(c, testing::example_system()), ValidationError);
}

TEST(Feedback, MarkovianGainCancelsConditionalMeanNoise) {
  const MomentModel m = derive_moment_model(testing::example_system());
  const FilterModel fm = filter_model(m, homodyne(0.9));
  const RiccatiSolution w = solve_filter_care(fm);
  const Matrix b = Matrix::Identity(2, 2);
  const MarkovianGain g = markovian_gain(w.X, fm, b);
  const Matrix residual = b * g.F + w.X * fm.C.transpose() + fm.Gamma.transpose();
  EXPECT_LE(residual.norm(), 1e-12);
  EXPECT_LE(g.cancellation_residual, 1e-12);
  EXPECT_FALSE(g.pseudo_inverse);
}

TEST(Feedback, MarkovianDriftMatchesDefinition) {
  const MomentModel m = derive_moment_model(testing::example_system());
  const FilterModel fm = filter_model(m, homodyne(0.9));
  const RiccatiSolution w = solve_filter_care(fm);
  const ControlProblem c = testing::example_control();
  const ControllerDesign d = design_markovian(w.X, fm, Matrix::Identity(2, 2), c.P);
  const Matrix expected = m.A - (w.X * fm.C.transpose() + fm.Gamma.transpose()) * fm.C;
  EXPECT_LE((d.M_closed - expected).norm(), 1e-12);
  EXPECT_NEAR(d.predicted_cost, (c.P * w.X).trace(), 1e-12);
}

TEST(Feedback, SeparationSpectrum) {
  // Closed-loop spectrum of the optimal controller is the union of the
  // regulator and filter spectra.
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 20; ++trial) {
    const SystemSpec s = testing::random_system(rng, 1 + trial % 2, 1 + trial % 2);
    const MomentModel m = derive_moment_model(s);
    const FilterModel fm = filter_model(m, testing::random_unravelling(rng, s.channels(), false));
    if (!pbh_detectable(fm.C, fm.omega_eff)) continue;
    const RiccatiSolution w = solve_filter_care(fm);
    const Eigen::Index n = m.A.rows();
    const Matrix p = testing::random_psd(rng, n, n) + 0.1 * Matrix::Identity(n, n);
    const Matrix q = Matrix::Identity(n, n);
    const RiccatiSolution y = solve_control_care(m.A, s.B, p, q);
    const ControllerDesign d = design_optimal(y, w.X, fm, s.B, q);
    const ClosedLoop cl = closed_loop_matrix(d, fm, s.B);

    const Matrix k = q.llt().solve(s.B.transpose() * y.X);
    const Matrix lgain = w.X * fm.C.transpose() + fm.Gamma.transpose();
    Matrix big(2 * n, 2 * n);
    big << m.A, -s.B * k, lgain * fm.C, m.A - s.B * k - lgain * fm.C;
    std::vector<double> joint_re, split_re;
    for (const auto& e : eigenvalues(big)) {
      joint_re.push_back(e.real());
    }
    for (const auto& e : cl.mean_eigs) split_re.push_back(e.real());
    for (const auto& e : cl.filter_eigs) split_re.push_back(e.real());
    std::sort(joint_re.begin(), joint_re.end());
    std::sort(split_re.begin(), split_re.end());
    ASSERT_EQ(joint_re.size(), split_re.size());
    for (size_t i = 0; i < joint_re.size(); ++i) {
      EXPECT_NEAR(joint_re[i], split_re[i], 1e-6 * (1 + std::abs(joint_re[i])));
    }
    EXPECT_LT(testing::max_real_eig(big), 0.0);
  }
}

TEST(Feedback, OptimalCostEqualsFilterPlusMeanFluctuationCost) {
  // tr[P W] + tr[Y L L^T] with L = W C^T + Gamma^T, the innovation gain.
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const SystemSpec s = testing::random_system(rng, 1 + trial % 3, 1 + trial % 2);
    const MomentModel m = derive_moment_model(s);
    const FilterModel fm = filter_model(m, testing::random_unravelling(rng, s.channels(), false));
    if (!pbh_detectable(fm.C, fm.omega_eff)) continue;
    const RiccatiSolution w = solve_filter_care(fm);
    const Eigen::Index n = m.A.rows();
    const Matrix p = testing::random_psd(rng, n, n);
    const Matrix q = testing::random_psd(rng, n, n) + 0.5 * Matrix::Identity(n, n);
    const RiccatiSolution y = solve_control_care(m.A, s.B, p, q);
    const Matrix l = w.X * fm.C.transpose() + fm.Gamma.transpose();
    const double expected = (p * w.X).trace() + (y.X * l * l.transpose()).trace();
    EXPECT_NEAR(optimal_cost(y, s.B, q, m.D, w.X), expected, 1e-8 * (1 + std::abs(expected)));
  }
  const Matrix w = Matrix::Identity(2, 2);
  EXPECT_NEAR(optimal_cost_q_zero(testing::example_control().P, w), 2.0, 1e-15);
}

}  // namespace
}  // namespace qlqg
