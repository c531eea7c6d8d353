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

#include "fairfed/privatizer.hpp"

#include <bit>
#include <cmath>
#include <random>

#include "gtest/gtest.h"

namespace fairfed {
namespace {

Eigen::MatrixXd Cell(double v) { return Eigen::MatrixXd::Constant(1, 2, v); }

int CeilLog2(std::int64_t k) {
  int c = 0;
  while ((std::int64_t{1} << c) < k) ++c;
  return c;
}

TEST(PerNodePrivacyTest, Examples) {
  const NodePrivacy p = per_node_privacy(2.0, 0.1, 10);
  // 2 / sqrt(80 ln 20), evaluated in 30-digit arithmetic.
  EXPECT_NEAR(p.epsilon, 0.12919136981535068, 1e-12);
  EXPECT_NEAR(p.delta, 0.005, 1e-18);
  for (double delta : {0.01, 0.3, 0.9}) {
    EXPECT_LT(per_node_privacy(1.0, delta, 1).epsilon, 1.0);
  }
  for (int m : {1, 3, 10}) {
    EXPECT_NEAR(per_node_privacy(1.5, 0.1, 4 * m).epsilon,
                per_node_privacy(1.5, 0.1, m).epsilon / 2.0, 1e-15);
  }
  EXPECT_THROW(per_node_privacy(0.0, 0.1, 1), ConfigError);
  EXPECT_THROW(per_node_privacy(1.0, 1.0, 1), ConfigError);
  EXPECT_THROW(per_node_privacy(1.0, 0.1, 0), ConfigError);
}

TEST(TreeDepthTest, Examples) {
  EXPECT_EQ(tree_depth(1), 1);
  EXPECT_EQ(tree_depth(2), 2);
  EXPECT_EQ(tree_depth(5), 4);
  EXPECT_EQ(tree_depth(8), 4);
  EXPECT_EQ(tree_depth(9), 5);
  for (std::int64_t k = 1; k <= 5000; ++k) {
    ASSERT_EQ(tree_depth(k), 1 + CeilLog2(k));
  }
}

TEST(CalibrateTest, NoiseVarianceFormula) {
  const PrivacyParams p = calibrate(2.0, 0.1, 5, 5, std::sqrt(5.0), 6668, 0.1, 1.0);
  EXPECT_EQ(p.depth, 14);
  const double eps0 = 2.0 / std::sqrt(40.0 * std::log(20.0));
  const double delta0 = 0.01;
  const double expected = 16.0 * 14 * 36.0 * std::pow(std::log(2.0 / delta0), 2) /
                          (eps0 * eps0);
  EXPECT_NEAR(p.noise_sigma2, expected, 1e-9 * expected);
  const double s = std::sqrt(28.0) * std::sqrt(expected);
  const double lg = 2.0 * std::log(2.0 * 6668 * 5 / 0.1);
  EXPECT_NEAR(p.shift, s * (4.0 * std::sqrt(5.0) + lg), 1e-9 * p.shift);
  EXPECT_NEAR(p.z, s * (std::sqrt(5.0) + lg), 1e-9 * p.z);
  EXPECT_EQ(p.rho_underbar, p.shift);
  EXPECT_EQ(p.rho_bar, 3.0 * p.shift);
}

TEST(AccuracyTripleTest, ZeroNoiseFloorsAtRidge) {
  const PrivacyParams p = zero_noise_params(4, 3, 16, 1.0);
  const AccuracyTriple a = accuracy_triple(p, 16, 0.1, 1.0);
  EXPECT_EQ(a.shift, 0.0);
  EXPECT_EQ(a.z, 0.0);
  EXPECT_EQ(a.rho_bar, 1.0);
  EXPECT_EQ(a.rho_underbar, 1.0);
}

TEST(AccuracyTripleTest, Monotone) {
  PrivacyParams p = calibrate(1.0, 0.1, 3, 4, 1.0, 100, 0.1, 1.0);
  const double base = accuracy_triple(p, 100, 0.1, 1.0).shift;
  PrivacyParams deeper = p;
  deeper.depth += 1;
  EXPECT_GT(accuracy_triple(deeper, 100, 0.1, 1.0).shift, base);
  PrivacyParams louder = p;
  louder.noise_sigma2 *= 1.1;
  EXPECT_GT(accuracy_triple(louder, 100, 0.1, 1.0).shift, base);
  EXPECT_GT(accuracy_triple(p, 100, 0.05, 1.0).shift, base);
}

TEST(NodeNoiseTest, ZeroVarianceAndSymmetry) {
  Stream rng = Stream::For(1, Purpose::kTreeNoise);
  EXPECT_EQ(sample_node_noise(3, 0.0, rng), Eigen::MatrixXd::Zero(3, 4));
  for (int j = 0; j < 100; ++j) {
    const Eigen::MatrixXd n = sample_node_noise(4, 2.5, rng);
    const Eigen::MatrixXd block = n.leftCols(4);
    ASSERT_EQ(block, block.transpose());
  }
}

// 10^5 draws: off-diagonal and reward-column variance sigma2, diagonal 2 sigma2.
TEST(NodeNoiseTest, VarianceWithinFivePercent) {
  constexpr int kN = 100000;
  const double sigma2 = 3.7;
  Stream rng = Stream::For(2, Purpose::kTreeNoise);
  double off = 0.0, diag = 0.0, col = 0.0;
  for (int j = 0; j < kN; ++j) {
    const Eigen::MatrixXd n = sample_node_noise(2, sigma2, rng);
    off += n(1, 0) * n(1, 0);
    diag += n(0, 0) * n(0, 0);
    col += n(1, 2) * n(1, 2);
  }
  EXPECT_NEAR(off / kN, sigma2, 0.05 * sigma2);
  EXPECT_NEAR(diag / kN, 2.0 * sigma2, 0.05 * 2.0 * sigma2);
  EXPECT_NEAR(col / kN, sigma2, 0.05 * sigma2);
}

TEST(NoiseTreeTest, InsertExamples) {
  NoiseTree zeros(1, 3, 0.0, Stream::For(1, Purpose::kTreeNoise));
  for (int j = 0; j < 4; ++j) zeros.Insert(Cell(0.0));
  EXPECT_EQ(zeros.NodeData(2, 0), Cell(0.0));

  NoiseTree t(1, 3, 0.0, Stream::For(1, Purpose::kTreeNoise));
  for (double v : {1.0, 2.0, 3.0, 4.0}) {
    t.Insert(Cell(v));
    ASSERT_TRUE(t.CheckInvariants());
  }
  EXPECT_EQ(t.NodeData(2, 0), Cell(10.0));
  EXPECT_THROW(t.Insert(Cell(5.0)), CapacityError);
  EXPECT_THROW(t.Insert(Eigen::MatrixXd::Zero(2, 3)), InvariantError);
}

TEST(NoiseTreeTest, PrefixExamples) {
  NoiseTree t(1, 4, 0.0, Stream::For(1, Purpose::kTreeNoise));
  for (double v : {1.0, 2.0, 3.0, 4.0, 5.0}) t.Insert(Cell(v));
  const NoiseTree::Release r = t.NoisyPrefix(5);
  EXPECT_EQ(r.value, Cell(15.0));
  EXPECT_EQ(r.nodes_used, 2);
  EXPECT_EQ(t.NoisyPrefix(4).nodes_used, 1);
  EXPECT_EQ(t.NoisyPrefix(2).nodes_used, 1);
  EXPECT_EQ(t.NoisyPrefix(1).nodes_used, 1);
  EXPECT_EQ(t.DyadicDataSum(5), Cell(15.0));
  EXPECT_THROW(t.NoisyPrefix(0), RangeError);
  EXPECT_THROW(t.NoisyPrefix(6), RangeError);
}

TEST(NoiseTreeTest, NodeCountBound) {
  NoiseTree t(1, 13, 1.0, Stream::For(3, Purpose::kTreeNoise));
  for (std::int64_t k = 1; k <= 4096; ++k) {
    t.Insert(Cell(1.0));
    const int used = t.NoisyPrefix(k).nodes_used;
    ASSERT_EQ(used, std::popcount(static_cast<std::uint64_t>(k)));
    ASSERT_LE(used, 1 + CeilLog2(k));
  }
}

// The release noise is exactly the sum of the cover nodes' noise.
TEST(NoiseTreeTest, ReleaseNoiseIsCoverNoise) {
  NoiseTree t(2, 4, 1.3, Stream::For(4, Purpose::kTreeNoise));
  for (int k = 0; k < 7; ++k) t.Insert(Eigen::MatrixXd::Constant(2, 3, k));
  const Eigen::MatrixXd expected_noise =
      t.NodeNoise(2, 0) + t.NodeNoise(1, 2) + t.NodeNoise(0, 6);
  const Eigen::MatrixXd got = t.NoisyPrefix(7).value - t.DyadicDataSum(7);
  EXPECT_LT((got - expected_noise).cwiseAbs().maxCoeff(), 1e-12);
}

// 10^4 random insertion sequences against a flat accumulator, bit-exact.
TEST(NoiseTreeTest, ZeroNoiseMatchesFlatAccumulator) {
  std::mt19937_64 gen(77);
  std::normal_distribution<double> n01;
  for (int seq = 0; seq < 10000; ++seq) {
    const int d = 1 + seq % 3;
    const int len = 1 + static_cast<int>(gen() % 16);
    NoiseTree t(d, tree_depth(len), 0.0, Stream::For(seq, Purpose::kTreeNoise));
    Eigen::MatrixXd flat = Eigen::MatrixXd::Zero(d, d + 1);
    for (int k = 1; k <= len; ++k) {
      Eigen::MatrixXd m(d, d + 1);
      for (Eigen::Index e = 0; e < m.size(); ++e) m.data()[e] = n01(gen);
      t.Insert(m);
      flat += m;
      ASSERT_EQ(t.NoisyPrefix(k).value, flat) << "seq " << seq << " k " << k;
    }
    ASSERT_TRUE(t.CheckInvariants());
  }
}

TEST(PrivatizeTest, ZeroNoiseIsExact) {
  const PrivacyParams p = zero_noise_params(1, 1, 4, 1.0);
  NoiseTree t(1, p.depth, 0.0, Stream::For(1, Purpose::kTreeNoise));
  const SymMat s(Eigen::MatrixXd::Constant(1, 1, 2.0));
  const PrivateRelease r = privatize(s, Vec::Constant(1, 3.0), s,
                                     Vec::Constant(1, 3.0), t, p);
  EXPECT_EQ(r.gram(0, 0), 2.0);
  EXPECT_EQ(r.reward(0), 3.0);
  const SymMat s2(Eigen::MatrixXd::Constant(1, 1, 4.0));
  const PrivateRelease r2 = privatize(s2, Vec::Constant(1, 4.0), s,
                                      Vec::Constant(1, 1.0), t, p);
  EXPECT_EQ(r2.gram(0, 0), 4.0);
  EXPECT_EQ(r2.reward(0), 4.0);
  EXPECT_EQ(t.NoisyPrefix(2).value, t.DyadicDataSum(2));
  EXPECT_THROW(privatize(SymMat::Zero(2), Vec::Zero(2), SymMat::Zero(2),
                         Vec::Zero(2), t, p),
               InvariantError);
}

TEST(PrivatizeTest, ReleaseIsCumulativePlusCoverNoiseAndShift) {
  const PrivacyParams p = calibrate(1.0, 0.1, 2, 2, 1.0, 8, 0.1, 1.0);
  NoiseTree t(2, p.depth, p.noise_sigma2, Stream::For(3, Purpose::kTreeNoise));
  SymMat cum = SymMat::Zero(2);
  Vec cum_r = Vec::Zero(2);
  for (int k = 1; k <= 5; ++k) {
    const SymMat inc = SymMat::Identity(2, k);
    const Vec inc_r = Vec::Constant(2, k);
    cum += inc;
    cum_r += inc_r;
    const PrivateRelease rel = privatize(cum, cum_r, inc, inc_r, t, p);
    const NoiseTree::Release noise = t.PrefixNoise(k);
    Eigen::MatrixXd expected = cum.matrix() + noise.value.leftCols(2);
    expected.diagonal().array() += 2.0 * p.shift;
    ASSERT_EQ(rel.gram.matrix(), expected);
    ASSERT_EQ(rel.reward, cum_r + noise.value.col(2));
    ASSERT_EQ(rel.nodes_used, std::popcount(static_cast<unsigned>(k)));
  }
}

// Calibrated noise: spectral norm of the accumulated Gram noise against
// Lambda, and positivity of the shifted release.
TEST(PrivatizeTest, NoiseWithinShiftAndReleasesPsd) {
  constexpr int kTrees = 200, kSyncs = 20, d = 3, m = 4;
  const double alpha = 0.1;
  const PrivacyParams p = calibrate(1.0, 0.1, m, d, 1.0, kSyncs, alpha, 1.0);
  std::int64_t exceed = 0, calls = 0;
  int psd_runs = 0;
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int tree = 0; tree < kTrees; ++tree) {
    NoiseTree t(d, p.depth, p.noise_sigma2,
                Stream::For(tree, Purpose::kTreeNoise, {7}));
    Eigen::MatrixXd exact = Eigen::MatrixXd::Zero(d, d);
    bool all_psd = true;
    for (int k = 0; k < kSyncs; ++k) {
      SymMat inc = SymMat::Zero(d);
      for (int r = 0; r < 5; ++r) {
        Vec x(d);
        for (int j = 0; j < d; ++j) x(j) = u(gen);
        inc = rank_one_update(inc, x);
      }
      exact += inc.matrix();
      const PrivateRelease rel =
          privatize(SymMat(exact), Vec::Zero(d), inc, Vec::Zero(d), t, p);
      Eigen::MatrixXd h = rel.gram.matrix() - exact;
      h.diagonal().array() -= 2.0 * p.shift;
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
      const double norm = es.eigenvalues().cwiseAbs().maxCoeff();
      ++calls;
      if (norm > p.shift) ++exceed;
      if (min_eig(rel.gram) < 0.0) all_psd = false;
    }
    if (all_psd) ++psd_runs;
  }
  EXPECT_LE(double(exceed) / double(calls), alpha + 0.03);
  EXPECT_LT(double(exceed) / double(calls), 0.05);
  EXPECT_GE(double(psd_runs) / kTrees, 1.0 - alpha - 0.03);
}

}  // namespace
}  // namespace fairfed
