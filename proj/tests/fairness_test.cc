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

#include "fairfed/fairness.hpp"

#include <cmath>
#include <random>

#include "gtest/gtest.h"
#include "oracles.hpp"

namespace fairfed {
namespace {

const MeritFn kF = MeritFn::Exponential(10.0, 0.0, 1.0);

Vec Make(std::initializer_list<double> v) {
  Vec out(v.size());
  int j = 0;
  for (double x : v) out(j++) = x;
  return out;
}

Policy P(std::initializer_list<double> v) { return Policy{Make(v)}; }

TEST(MeritTest, Examples) {
  EXPECT_EQ(merit(kF, 0.0), 1.0);
  EXPECT_NEAR(merit(kF, 0.1), std::exp(1.0), 1e-14);
  EXPECT_NEAR(merit(kF, 0.25), 12.182493960703473, 1e-12);
  EXPECT_THROW(merit(kF, 70.5), RangeError);
}

TEST(MeritTest, Audit) {
  EXPECT_EQ(kF.gamma(), 1.0);
  EXPECT_NEAR(kF.lipschitz(), 10.0 * std::exp(10.0), 1e-6);
  const MeritFn flat = MeritFn::Exponential(1e-9, 0.0, 1.0);
  EXPECT_LT(flat.lipschitz(), 1e-8);
  const MeritFn point = MeritFn::Exponential(10.0, 0.0, 0.0);
  EXPECT_EQ(point.gamma(), 1.0);
  EXPECT_EQ(point.lipschitz() / 10.0, 1.0);
  EXPECT_THROW(MeritFn::Exponential(0.0, 0.0, 1.0), ConfigError);
  EXPECT_THROW(MeritFn::Exponential(1.0, 1.0, 0.0), RangeError);
}

TEST(PolicyTest, Examples) {
  const Policy u = policy_from_scores(Make({0.3, 0.3, 0.3, 0.3}), kF);
  for (int a = 0; a < 4; ++a) EXPECT_NEAR(u[a], 0.25, 1e-15);
  const Policy two = policy_from_scores(Make({0.0, 0.1}), kF);
  const double e = std::exp(1.0);
  EXPECT_NEAR(two[0], 1.0 / (1.0 + e), 1e-15);
  EXPECT_NEAR(two[1], e / (1.0 + e), 1e-15);
  EXPECT_NEAR(two[0], 0.26894, 1e-5);
  EXPECT_EQ(policy_from_scores(Make({0.42}), kF)[0], 1.0);
  EXPECT_THROW(policy_from_scores(Vec(0), kF), RangeError);
}

TEST(PolicyTest, IdenticalContextsUniform) {
  ContextSet ctx;
  ctx.x = Eigen::MatrixXd::Constant(5, 3, 0.7);
  const Policy p = construct_policy(Make({0.1, 0.5, 0.2}), ctx, kF);
  for (int a = 0; a < 5; ++a) EXPECT_NEAR(p[a], 0.2, 1e-15);
}

TEST(PolicyTest, OptimalMatchesConstructAtThetaStar) {
  const Instance inst = gen_instance(5, 10, 1, 3, 0.1, 4, NormMode::kRaw);
  const ContextSet ctx = draw_contexts(inst, 2, 1);
  EXPECT_EQ(optimal_policy(inst, ctx, kF).probs,
            construct_policy(inst.theta_star, ctx, kF).probs);
}

// Random 3-arm cases against a long-double normalization.
TEST(PolicyTest, ExtendedPrecisionOracle) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    const Vec s = Make({u(gen), u(gen), u(gen)});
    const Policy p = policy_from_scores(s, kF);
    const fairfed_test::LVec ref =
        fairfed_test::Softmax({s(0), s(1), s(2)}, 10.0L);
    for (int a = 0; a < 3; ++a) {
      ASSERT_NEAR(p[a], double(ref[a]), 1e-14);
    }
  }
}

TEST(PolicyPropertyTest, ExposureProportionalToMerit) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    Vec s(6);
    for (int a = 0; a < 6; ++a) s(a) = u(gen);
    const Policy p = policy_from_scores(s, kF);
    ASSERT_NEAR(p.probs.sum(), 1.0, 1e-14);
    ASSERT_GT(p.probs.minCoeff(), 0.0);
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 6; ++b) {
        // pi(a) / pi(b) == f(mu_a) / f(mu_b)
        ASSERT_NEAR(p[a] * merit(kF, s(b)), p[b] * merit(kF, s(a)),
                    1e-12 * merit(kF, 1.0));
      }
    }
    // A common shift of all scores leaves the policy unchanged.
    const Policy shifted = policy_from_scores(s.array() + 3.0, kF);
    ASSERT_LT((shifted.probs - p.probs).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(FairnessRegretTest, Examples) {
  EXPECT_EQ(fairness_regret_instant(P({0.2, 0.8}), P({0.2, 0.8})), 0.0);
  EXPECT_EQ(fairness_regret_instant(P({1, 0}), P({0, 1})), 2.0);
  EXPECT_NEAR(fairness_regret_instant(P({0.3, 0.7}), P({0.5, 0.5})), 0.4,
              1e-15);
  EXPECT_THROW(fairness_regret_instant(P({1}), P({0.5, 0.5})), InvariantError);
}

TEST(FairnessRegretTest, MetricProperties) {
  std::mt19937_64 gen(9);
  std::gamma_distribution<double> g(1.0);
  auto draw = [&] {
    Vec v(5);
    for (int a = 0; a < 5; ++a) v(a) = g(gen);
    return Policy{v / v.sum()};
  };
  for (int trial = 0; trial < 1000; ++trial) {
    const Policy a = draw(), b = draw(), c = draw();
    const double ab = fairness_regret_instant(a, b);
    ASSERT_GE(ab, 0.0);
    ASSERT_LE(ab, 2.0 + 1e-15);
    ASSERT_EQ(ab, fairness_regret_instant(b, a));
    ASSERT_LE(fairness_regret_instant(a, c),
              ab + fairness_regret_instant(b, c) + 1e-15);
  }
}

TEST(RewardRegretTest, Examples) {
  ContextSet one;
  one.x = Eigen::MatrixXd::Constant(1, 2, 0.5);
  EXPECT_EQ(reward_regret_instant(P({1}), P({1}), one, Make({1, 1})), 0.0);
  ContextSet two;
  two.x.resize(2, 1);
  two.x << 0.2, 0.8;
  EXPECT_EQ(reward_regret_instant(P({0.4, 0.6}), P({0.4, 0.6}), two, Make({1})),
            0.0);
  EXPECT_NEAR(reward_regret_instant(P({0.5, 0.5}), P({0.26894, 0.73106}), two,
                                    Make({1})),
              0.13864, 1e-5);
}

}  // namespace
}  // namespace fairfed
