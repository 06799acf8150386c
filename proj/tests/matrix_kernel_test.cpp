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
#include "qlqg/matrix_kernel.hpp"
#include "test_support.hpp"

namespace qlqg {
namespace {

TEST(MatrixKernel, SymplecticFormIsAntisymmetricAndSquaresToMinusIdentity) {
  for (int n = 1; n <= 4; ++n) {
    const Matrix s = symplectic_form(n);
    EXPECT_EQ((s + s.transpose()).norm(), 0.0);
    EXPECT_EQ((s * s + Matrix::Identity(2 * n, 2 * n)).norm(), 0.0);
  }
  EXPECT_THROW(symplectic_form(0), ValidationError);
}

TEST(MatrixKernel, InvolutionBlocks) {
  const Matrix s = involution_s(2);
  Matrix expected(4, 4);
  expected << 0, 0, 1, 0, 0, 0, 0, 1, -1, 0, 0, 0, 0, -1, 0, 0;
  EXPECT_EQ(s, expected);
}

TEST(MatrixKernel, IsPsdBoundaryCases) {
  Matrix m(2, 2);
  m << 1, 1, 1, 1;
  EXPECT_TRUE(is_psd(m).psd);
  m << 1, 0, 0, -1e-6;
  const PsdCheck c = is_psd(m);
  EXPECT_FALSE(c.psd);
  EXPECT_NEAR(c.min_eigenvalue, -1e-6, 1e-15);
  EXPECT_NEAR(std::abs(c.witness(1)), 1.0, 1e-12);
  m << 1, 2, 0, 1;
  EXPECT_THROW(is_psd(m), ValidationError);
}

TEST(MatrixKernel, PurityBoundaryMatrixIsPsd) {
  // [[1, -b], [-b, 1 - 2g]] with g = (1 - b^2) / 2 has a zero eigenvalue.
  const double b = 0.248, g = (1 - b * b) / 2;
  Matrix m(2, 2);
  m << 1, -b, -b, 1 - 2 * g;
  const PsdCheck c = is_psd(m);
  EXPECT_TRUE(c.psd);
  EXPECT_NEAR(c.min_eigenvalue, 0.0, 1e-12);
}

TEST(MatrixKernel, HermitianEmbedOfVacuumIsPsdAndSingular) {
  const Matrix e = hermitian_embed(0.5 * Matrix::Identity(2, 2), 1.0);
  EXPECT_NEAR(testing::min_sym_eig(e), 0.0, 1e-14);
  const Matrix bad = hermitian_embed(0.25 * Matrix::Identity(2, 2), 1.0);
  EXPECT_LT(testing::min_sym_eig(bad), -0.2);
}

TEST(MatrixKernel, PsdSqrtOfSquareRecoversMatrix) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 1 + trial % 6;
    const Matrix x = testing::random_psd(rng, n, n) + 0.1 * Matrix::Identity(n, n);
    const Matrix r = psd_sqrt(x * x);
    EXPECT_LE((r - x).norm(), 1e-10 * (1 + x.norm())) << "trial " << trial;
  }
}

TEST(MatrixKernel, PsdSqrtRejectsIndefinite) {
  Matrix m(2, 2);
  m << 1, 0, 0, -1;
  EXPECT_THROW(psd_sqrt(m), ValidationError);
}

TEST(MatrixKernel, LyapunovMatchesScalarFormula) {
  Matrix a(1, 1), q(1, 1);
  a << -2.0;
  q << 3.0;
  EXPECT_NEAR(solve_lyapunov(a, q)(0, 0), 0.75, 1e-15);
}

TEST(MatrixKernel, LyapunovResidualOnRandomStableSystems) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Eigen::Index n = 2 + trial % 5;
    Matrix a = testing::random_matrix(rng, n, n);
    a -= (testing::max_real_eig(a) + 0.5) * Matrix::Identity(n, n);
    const Matrix q = testing::random_psd(rng, n, n);
    const Matrix x = solve_lyapunov(a, q);
    EXPECT_LE((a * x + x * a.transpose() + q).norm(), 1e-10 * (1 + q.norm()));
  }
}

TEST(MatrixKernel, LyapunovRejectsUnstableDrift) {
  try {
    solve_lyapunov(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("no stationary unconditional covariance"),
              std::string::npos);
  }
}

TEST(MatrixKernel, ToleranceConfigValidation) {
  ToleranceConfig tol;
  EXPECT_NO_THROW(tol.validate());
  tol.psd_tol = -1;
  EXPECT_THROW(tol.validate(), ValidationError);
}

}  // namespace
}  // namespace qlqg
