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

// Merit functions, exposure-proportional policies and the per-round
// fairness / reward regret metrics.
//
// A policy is fair in the exposure sense when pi(a) / f(mu_a) is the same
// for every action a, i.e. pi(a) = f(mu_a) / sum_a' f(mu_a').

#ifndef FAIRFED_FAIRNESS_HPP_
#define FAIRFED_FAIRNESS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fairfed/environment.hpp"
#include "fairfed/errors.hpp"
#include "fairfed/numkit.hpp"

namespace fairfed {

// Largest exponent merit() accepts before exp() gets close to overflow.
inline constexpr double kMaxMeritExponent = 700.0;

struct MeritBounds {
  double gamma;      // min of f on the audited range
  double lipschitz;  // Lipschitz constant of f on the audited range
};

// Exact bounds for f(mu) = exp(c_f * mu) on [mu_min, mu_max].
inline MeritBounds audit_merit(double steepness, double mu_min,
                               double mu_max) {
  if (mu_min > mu_max) throw RangeError("audit_merit: mu_min > mu_max");
  return {std::exp(steepness * mu_min),
          steepness * std::exp(steepness * mu_max)};
}

// f(mu) = exp(c_f * mu). Only the exponential family is provided; gamma and
// L_f are certified for the reachable score range passed at construction.
class MeritFn {
 public:
  static MeritFn Exponential(double steepness, double mu_min, double mu_max) {
    if (!(steepness > 0.0)) {
      throw ConfigError("MeritFn: steepness must be positive");
    }
    MeritFn f;
    f.steepness_ = steepness;
    f.mu_min_ = mu_min;
    f.mu_max_ = mu_max;
    const MeritBounds b = audit_merit(steepness, mu_min, mu_max);
    f.gamma_ = b.gamma;
    f.lipschitz_ = b.lipschitz;
    f.GridAudit();
    return f;
  }

  double steepness() const { return steepness_; }
  double gamma() const { return gamma_; }
  double lipschitz() const { return lipschitz_; }
  double mu_min() const { return mu_min_; }
  double mu_max() const { return mu_max_; }

 private:
  // Dense-grid confirmation of the closed-form bounds.
  void GridAudit() const {
    constexpr int kPoints = 2001;
    constexpr double kEpsilon = std::numeric_limits<double>::epsilon();
    const double span = mu_max_ - mu_min_;
    double prev_mu = mu_min_;
    double prev_f = std::exp(steepness_ * prev_mu);
    for (int j = 0; j < kPoints; ++j) {
      const double mu = mu_min_ + span * j / (kPoints - 1);
      const double fv = std::exp(steepness_ * mu);
      if (fv < gamma_ * (1.0 - 1e-12)) {
        throw InvariantError("MeritFn: f falls below gamma on audit grid");
      }
      if (j > 0 && mu > prev_mu &&
          (fv - prev_f) > lipschitz_ * (mu - prev_mu) * (1.0 + 1e-9) +
                              4.0 * kEpsilon * fv) {
        throw InvariantError("MeritFn: Lipschitz bound violated on audit grid");
      }
      prev_mu = mu;
      prev_f = fv;
    }
  }

  double steepness_ = 10.0;
  double mu_min_ = 0.0;
  double mu_max_ = 1.0;
  double gamma_ = 1.0;
  double lipschitz_ = 0.0;
};

inline double merit(const MeritFn& f, double mu) {
  const double e = f.steepness() * mu;
  if (e > kMaxMeritExponent) {
    throw RangeError("merit: exponent " + std::to_string(e) + " exceeds " +
                     std::to_string(kMaxMeritExponent));
  }
  return std::exp(e);
}

struct Policy {
  Vec probs;

  int size() const { return static_cast<int>(probs.size()); }
  double operator[](int a) const { return probs(a); }
};

// Softmax of c_f * scores, max-shifted so that large scores cannot overflow.
inline Policy policy_from_scores(const Vec& scores, const MeritFn& f) {
  if (scores.size() < 1) throw RangeError("policy: empty action set");
  const double c = f.steepness();
  const double top = scores.maxCoeff();
  Policy p;
  p.probs = ((scores.array() - top) * c).exp().matrix();
  p.probs /= p.probs.sum();
  return p;
}

inline Policy construct_policy(const Vec& theta, const ContextSet& ctx,
                               const MeritFn& f) {
  return policy_from_scores(ctx.x * theta, f);
}

// The fair policy under the true parameter.
inline Policy optimal_policy(const Instance& inst, const ContextSet& ctx,
                             const MeritFn& f) {
  return construct_policy(inst.theta_star, ctx, f);
}

// sum_a |pi*(a) - pi(a)|, in [0, 2].
inline double fairness_regret_instant(const Policy& pi, const Policy& pi_star) {
  if (pi.size() != pi_star.size()) {
    throw InvariantError("fairness_regret_instant: policy size mismatch");
  }
  return (pi_star.probs - pi.probs).cwiseAbs().sum();
}

// Expected-reward gap of the fair-optimal policy over the played one.
inline double reward_regret_instant(const Policy& pi, const Policy& pi_star,
                                    const ContextSet& ctx,
                                    const Vec& theta_star) {
  if (pi.size() != pi_star.size() || pi.size() != ctx.num_arms()) {
    throw InvariantError("reward_regret_instant: size mismatch");
  }
  const Vec mu = ctx.x * theta_star;
  return (pi_star.probs - pi.probs).dot(mu);
}

}  // namespace fairfed

#endif  // FAIRFED_FAIRNESS_HPP_
