//
// Copyright 2026 The FairFed Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "fairfed/numkit.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace fairfed {
namespace {

using fairfed_test::LMat;
using fairfed_test::LVec;

SymMat Sym(std::initializer_list<std::initializer_list<double>> rows) {
  const int d = static_cast<int>(rows.size());
  Eigen::MatrixXd m(d, d);
  int i = 0;
  for (const auto& r : rows) {
    int j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return SymMat(m);
}

SymMat ToSym(const LMat& a) {
  const int d = static_cast<int>(a.size());
  Eigen::MatrixXd m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = static_cast<double>(a[i][j]);
  return SymMat(m);
}

LMat ToL(const SymMat& s) {
  LMat a = fairfed_test::Zeros(s.dim(), s.dim());
  for (int i = 0; i < s.dim(); ++i)
    for (int j = 0; j < s.dim(); ++j) a[i][j] = s(i, j);
  return a;
}

Vec V2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

TEST(SymMatTest, RejectsAsymmetric) {
  Eigen::MatrixXd m(2, 2);
  m << 1, 2, 3, 4;
  EXPECT_THROW(SymMat{m}, InvariantError);
  EXPECT_THROW(SymMat{Eigen::MatrixXd(2, 3)}, InvariantError);
}

TEST(HnormTest, Examples) {
  EXPECT_DOUBLE_EQ(hnorm(V2(3, 4), SymMat::Identity(2)), 5.0);
  EXPECT_DOUBLE_EQ(hnorm(V2(1, 0), Sym({{4, 0}, {0, 1}})), 2.0);
  EXPECT_NEAR(hnorm(V2(1, 1), Sym({{2, 1}, {1, 2}})), std::sqrt(6.0), 1e-12);
}

TEST(HnormTest, IndefiniteMetricRejected) {
  EXPECT_THROW(hnorm(V2(1, 0), Sym({{-1, 0}, {0, 1}})), InvariantError);
}

TEST(RankOneUpdateTest, Examples) {
  Vec e1 = Vec::Zero(3);
  e1(0) = 1.0;
  SymMat r = rank_one_update(SymMat::Zero(3), e1);
  EXPECT_EQ(r(0, 0), 1.0);
  EXPECT_EQ(r.matrix().sum(), 1.0);
  EXPECT_EQ(rank_one_update(SymMat::Identity(3), Vec::Zero(3)),
            SymMat::Identity(3));
  EXPECT_EQ(rank_one_update(SymMat::Identity(2), V2(1, 1)),
            Sym({{2, 1}, {1, 2}}));
}

TEST(SolveSpdTest, Examples) {
  EXPECT_EQ(solve_spd(SymMat::Identity(2), V2(2, 3)), V2(2, 3));
  const Vec x = solve_spd(Sym({{2, 0}, {0, 1}}), V2(1, 1));
  EXPECT_DOUBLE_EQ(x(0), 0.5);
  EXPECT_DOUBLE_EQ(x(1), 1.0);
  const Vec y = solve_spd(Sym({{2, 0}, {0, 1}}), V2(1, 0));
  EXPECT_NEAR(y(0), 0.5, 1e-15);
  EXPECT_NEAR(y(1), 0.0, 1e-15);
}

TEST(SolveSpdTest, SingularRaisesWithEigenvalue) {
  try {
    solve_spd(Sym({{1, 0}, {0, -2}}), V2(1, 1));
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_NEAR(e.min_eigenvalue(), -2.0, 1e-12);
  }
  EXPECT_THROW(solve_spd(SymMat::Zero(2), V2(1, 1)), SolverError);
}

TEST(LogdetTest, Examples) {
  EXPECT_EQ(logdet(SymMat::Identity(3)), 0.0);
  EXPECT_NEAR(logdet(Sym({{std::exp(1.0), 0}, {0, std::exp(1.0)}})), 2.0,
              1e-14);
  EXPECT_NEAR(logdet(Sym({{2, 1}, {1, 2}})), std::log(3.0), 1e-14);
}

TEST(MinEigTest, Examples) {
  EXPECT_NEAR(min_eig(SymMat::Identity(4)), 1.0, 1e-14);
  EXPECT_NEAR(min_eig(Sym({{-1, 0}, {0, 5}})), -1.0, 1e-14);
  EXPECT_NEAR(min_eig(Sym({{2, 1}, {1, 2}})), 1.0, 1e-14);
}

// 1000 random SPD systems against the long-double oracles.
TEST(NumkitPropertyTest, RandomSpdAgreesWithOracle) {
  std::mt19937_64 gen(12345);
  std::uniform_int_distribution<int> dim(1, 8);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 1000; ++trial) {
    const int d = dim(gen);
    const LMat a = fairfed_test::RandomSpd(d, gen);
    const SymMat v = ToSym(a);
    Vec b(d), x(d);
    LVec lb(d), lx(d);
    for (int i = 0; i < d; ++i) {
      b(i) = n01(gen);
      lb[i] = b(i);
      x(i) = n01(gen);
      lx[i] = x(i);
    }
    const Vec sol = solve_spd(v, b);
    const LVec ref = fairfed_test::Solve(a, lb);
    for (int i = 0; i < d; ++i) {
      ASSERT_NEAR(sol(i), double(ref[i]), 1e-8 * (1.0 + std::fabs(double(ref[i]))));
    }
    ASSERT_NEAR(logdet(v), double(fairfed_test::LogAbsDet(a)), 1e-9);
    const LVec ev = fairfed_test::JacobiEigenvalues(a);
    ASSERT_NEAR(min_eig(v), double(*std::min_element(ev.begin(), ev.end())),
                1e-9);
    ASSERT_NEAR(hnorm(x, v), std::sqrt(double(fairfed_test::QuadForm(lx, a))),
                1e-9);

    // Matrix determinant lemma: ln det(V + x x^T) = ln det V + ln(1 + ||x||^2_{V^-1}).
    const SymMat up = rank_one_update(v, x);
    ASSERT_EQ(up.matrix(), up.matrix().transpose());
    const double w = SpdFactor(v).InverseNorm(x);
    ASSERT_NEAR(logdet(up), logdet(v) + std::log1p(w * w), 1e-9);
    // InverseNorm agrees with x^T V^{-1} x.
    ASSERT_NEAR(w * w, x.dot(solve_spd(v, x)),
                1e-8 * (1.0 + w * w));
  }
}

TEST(SpdFactorTest, FromWhitenedMapsUnitSphereToBoundary) {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> n01;
  for (int trial = 0; trial < 100; ++trial) {
    const SymMat v = ToSym(fairfed_test::RandomSpd(4, gen));
    Vec z(4);
    for (int i = 0; i < 4; ++i) z(i) = n01(gen);
    z.normalize();
    EXPECT_NEAR(hnorm(SpdFactor(v).FromWhitened(z), v), 1.0, 1e-10);
  }
}

}  // namespace
}  // namespace fairfed
