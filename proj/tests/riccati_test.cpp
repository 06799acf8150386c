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
#include "qlqg/riccati.hpp"
#include "test_support.hpp"

namespace qlqg {
namespace {

TEST(Riccati, ScalarQuadraticRoot) {
  Matrix a(1, 1), g(1, 1), q(1, 1);
  a << 0.7;
  g << 2.0;
  q << 3.0;
  const RiccatiSolution s = solve_care(a, g, q);
  EXPECT_NEAR(s.X(0, 0), testing::scalar_filter_root(0.7, 2.0, 3.0), 1e-13);
  EXPECT_TRUE(s.stabilizing);
}

TEST(Riccati, DiagonalSystemDecouplesIntoScalarRoots) {
  Matrix a(3, 3), g(3, 3), q(3, 3);
  a = Vector::LinSpaced(3, -1, 2).asDiagonal();
  g = Vector::LinSpaced(3, 0.5, 1.5).asDiagonal();
  q = Vector::LinSpaced(3, 0.2, 4).asDiagonal();
  const RiccatiSolution s = solve_care(a, g, q);
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(s.X(i, i), testing::scalar_filter_root(a(i, i), g(i, i), q(i, i)), 1e-12);
  }
}

TEST(Riccati, ExampleHeterodyneMatchesScalarOracle) {
  const SystemSpec spec = testing::example_system();
  const testing::OracleFilter o = testing::oracle_filter(spec, heterodyne(1).U);
  const Matrix g = o.C.transpose() * o.C;
  ASSERT_NEAR(o.Omega(0, 1), 0.0, 1e-15);
  ASSERT_NEAR(o.Omega(1, 0), 0.0, 1e-15);
  ASSERT_NEAR(g(0, 1), 0.0, 1e-15);
  ASSERT_NEAR(o.Noise(0, 1), 0.0, 1e-15);
  const double w0 = testing::scalar_filter_root(o.Omega(0, 0), g(0, 0), o.Noise(0, 0));
  const double w1 = testing::scalar_filter_root(o.Omega(1, 1), g(1, 1), o.Noise(1, 1));
  EXPECT_NEAR(w0, 0.5 + 1 / std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(w1, (std::sqrt(2.0) - 1) / 2, 1e-14);

  const RiccatiSolution s = solve_filter_care(filter_model(derive_moment_model(spec), heterodyne(1)));
  EXPECT_NEAR(s.X(0, 0), w0, 1e-9);
  EXPECT_NEAR(s.X(1, 1), w1, 1e-9);
  EXPECT_NEAR(s.X(0, 1), 0.0, 1e-9);
}

TEST(Riccati, ExampleHomodyneZeroPhase) {
  const SystemSpec spec = testing::example_system();
  const RiccatiSolution s = solve_filter_care(filter_model(derive_moment_model(spec), homodyne(0)));
  EXPECT_NEAR(s.X(0, 0), 1.0, 1e-9);
  EXPECT_NEAR(s.X(1, 1), 0.25, 1e-9);
  EXPECT_NEAR(s.X(0, 1), 0.0, 1e-9);
}

TEST(Riccati, AgreesWithHamiltonianEigenvectorOracle) {
  std::mt19937_64 rng(29);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const SystemSpec s = testing::random_system(rng, 1 + trial % 3, 1 + trial % 3);
    const UnravellingMatrix u = testing::random_unravelling(rng, s.channels(), false);
    const FilterModel fm = filter_model(derive_moment_model(s), u);
    if (!pbh_detectable(fm.C, fm.omega_eff)) continue;
    const RiccatiSolution sol = solve_filter_care(fm);
    const Matrix ref = testing::oracle_filter_w(testing::oracle_filter(s, u.U));
    ASSERT_EQ(ref.rows(), sol.X.rows());
    EXPECT_LE((sol.X - ref).norm(), 1e-7 * (1 + ref.norm())) << "trial " << trial;
    ++checked;
  }
  EXPECT_GT(checked, 40);
}

TEST(Riccati, RootDisciplineUnderPerturbation) {
  // The stabilizing root moves continuously with the data; no branch switch.
  const SystemSpec spec = testing::example_system();
  const FilterModel fm = filter_model(derive_moment_model(spec), homodyne(0.3));
  const Matrix a = fm.omega_eff.transpose(), g = fm.C.transpose() * fm.C;
  const Matrix w0 = solve_care(a, g, fm.noise_eff).X;
  for (double eps : {1e-8, 1e-6, 1e-4}) {
    const Matrix q = fm.noise_eff + eps * Matrix::Identity(2, 2);
    const RiccatiSolution s = solve_care(a, g, q);
    EXPECT_TRUE(s.stabilizing);
    EXPECT_LE((s.X - w0).norm(), 1e3 * eps) << eps;
    EXPECT_LE((s.X - testing::oracle_care(a, g, q)).norm(), 1e-9) << eps;
    EXPECT_GT(testing::min_sym_eig(s.X - w0), -1e-12) << "root must grow with the noise";
  }
}

TEST(Riccati, CertificateEigenvaluesAreStable) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    const SystemSpec s = testing::random_system(rng, 1 + trial % 3, 1 + (trial / 3) % 3);
    const UnravellingMatrix u = testing::random_unravelling(rng, s.channels(), false);
    const FilterModel fm = filter_model(derive_moment_model(s), u);
    if (!pbh_detectable(fm.C, fm.omega_eff)) continue;
    const RiccatiSolution sol = solve_filter_care(fm);
    const Matrix cl = fm.omega_eff - sol.X * fm.C.transpose() * fm.C;
    EXPECT_LE((cl - sol.closed_loop).norm(), 1e-10 * (1 + cl.norm()));
    EXPECT_LT(testing::max_real_eig(cl), -1e-8);
    EXPECT_LE(filter_residual(fm, sol.X), 1e-9);
  }
}

TEST(Riccati, UndetectableSystemRaises) {
  SystemSpec s;
  s.G = Matrix::Identity(2, 2);
  s.c_tilde.re = Matrix::Zero(1, 2);
  s.c_tilde.im = Matrix::Zero(1, 2);
  const FilterModel fm = filter_model(derive_moment_model(validate_spec(s)), heterodyne(1));
  EXPECT_THROW(solve_filter_care(fm), NotDetectableError);
}

TEST(Riccati, ControlRiccatiScalar) {
  // x' = a x + b u, cost p x^2 + q u^2: Y = q (a + sqrt(a^2 + b^2 p / q)) / b^2.
  Matrix a(1, 1), b(1, 1), p(1, 1), q(1, 1);
  a << 0.4;
  b << 2.0;
  p << 3.0;
  q << 0.5;
  const RiccatiSolution y = solve_control_care(a, b, p, q);
  EXPECT_NEAR(y.X(0, 0), 0.5 * (0.4 + std::sqrt(0.16 + 4 * 3 / 0.5)) / 4.0, 1e-13);
}

TEST(Riccati, ControlRiccatiRejectsSingularQ) {
  EXPECT_THROW(solve_control_care(Matrix::Identity(2, 2), Matrix::Identity(2, 2),
                                  Matrix::Identity(2, 2), Matrix::Zero(2, 2)),
               ValidationError);
}

TEST(Riccati, FlippedGammaViolatesUncertaintyFloor) {
  const MomentModel m = derive_moment_model(testing::example_system());
  const FilterModel fm = filter_model(m, heterodyne(1), {}, GammaSign::flipped);
  const RiccatiSolution s =
      solve_care(fm.omega_eff.transpose(), fm.C.transpose() * fm.C, fm.noise_eff);
  EXPECT_NEAR((2.0 * s.X).determinant(), 0.0672, 5e-4);
  EXPECT_LT(testing::min_sym_eig(testing::embedded_lmi(s.X, 1.0)), -1e-3);
  EXPECT_THROW(solve_filter_care(fm), NumericalError);
}

}  // namespace
}  // namespace qlqg
