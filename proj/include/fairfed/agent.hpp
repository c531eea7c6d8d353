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

// Single-agent fair LinUCB core: ridge sufficient statistics, confidence
// radius schedules, and the act / update cycle.

#ifndef FAIRFED_AGENT_HPP_
#define FAIRFED_AGENT_HPP_

#include <cmath>
#include <optional>
#include <string>

#include "fairfed/environment.hpp"
#include "fairfed/errors.hpp"
#include "fairfed/fairness.hpp"
#include "fairfed/numkit.hpp"
#include "fairfed/optimizer.hpp"
#include "fairfed/rng.hpp"
#include "json.hpp"

namespace fairfed {

// Sufficient statistics of one agent.
//
// V = ridge * I + (others + own). `others` sums what the other agents
// contributed at the last synchronization; `own` is this agent's own
// contribution (its exact running sum, or its privatized release) plus
// every observation since. The ridge is a scalar, lambda before the first
// synchronization and m * lambda after, kept out of the sums. Without
// privacy a lone agent's V therefore does not depend on when
// synchronizations happen, bit for bit.
struct AgentState {
  int id = 0;
  double shared_ridge = 1.0;
  SymMat others_gram;
  Vec others_reward;
  SymMat own_gram;
  Vec own_reward;
  SymMat local_gram;  // S, since last sync
  Vec local_reward;   // s, since last sync
  int delta = 0;      // rounds since last sync

  // Running sum of every observation of this agent.
  SymMat cumulative_gram;
  Vec cumulative_reward;

  Vec theta_hat;
  std::optional<Vec> last_theta_opt;

  static AgentState Init(int id, int d, double lambda) {
    if (!(lambda > 0.0)) throw ConfigError("AgentState: lambda must be > 0");
    AgentState s;
    s.id = id;
    s.shared_ridge = lambda;
    s.others_gram = SymMat::Zero(d);
    s.others_reward = Vec::Zero(d);
    s.own_gram = SymMat::Zero(d);
    s.own_reward = Vec::Zero(d);
    s.local_gram = SymMat::Zero(d);
    s.local_reward = Vec::Zero(d);
    s.cumulative_gram = SymMat::Zero(d);
    s.cumulative_reward = Vec::Zero(d);
    s.theta_hat = Vec::Zero(d);
    return s;
  }

  int dim() const { return own_gram.dim(); }

  SymMat gram() const {
    SymMat v = others_gram + own_gram;
    v.AddToDiagonal(shared_ridge);
    return v;
  }

  Vec reward_vector() const { return others_reward + own_reward; }
};

enum class BetaMode { kNonPrivate, kPrivate };

struct BetaSchedule {
  BetaMode mode = BetaMode::kNonPrivate;
  double sigma = 0.1;
  double alpha = 0.1;   // failure probability
  double lambda = 1.0;  // ridge
  double c = 1.0;       // bound on ||theta_star||_2
  int m = 1;
  double context_norm = 1.0;  // L_x
  // Accuracy triple, private mode only.
  std::optional<double> rho_bar;
  std::optional<double> rho_underbar;
  std::optional<double> z;
};

inline nlohmann::json to_json(const BetaSchedule& s) {
  nlohmann::json j = {
      {"mode", s.mode == BetaMode::kPrivate ? "private" : "nonprivate"},
      {"sigma", s.sigma},
      {"alpha", s.alpha},
      {"lambda", s.lambda},
      {"c", s.c},
      {"m", s.m},
      {"context_norm", s.context_norm},
      {"log_base", "e"}};
  if (s.rho_bar) j["rho_bar"] = *s.rho_bar;
  if (s.rho_underbar) j["rho_underbar"] = *s.rho_underbar;
  if (s.z) j["z"] = *s.z;
  return j;
}

// sqrt(beta_t) = sigma sqrt(d ln((1 + m t L_x^2 / lambda) / alpha))
//                + sqrt(lambda) c
inline double sqrt_beta_nonprivate(const BetaSchedule& s, int t, int d) {
  if (t < 1) throw RangeError("beta: t must be >= 1");
  const double inner =
      (1.0 + s.m * double(t) * s.context_norm * s.context_norm / s.lambda) /
      s.alpha;
  return s.sigma * std::sqrt(d * std::log(inner)) +
         std::sqrt(s.lambda) * s.c;
}

inline double beta_nonprivate(const BetaSchedule& s, int t, int d) {
  const double r = sqrt_beta_nonprivate(s, t, d);
  return r * r;
}

// sqrt(beta_t) = sigma sqrt(2 ln(2/alpha)
//                  + d ln(rho_bar/rho_under + t/(d rho_under)))
//                + m c sqrt(rho_bar) + m z
inline double sqrt_beta_private(const BetaSchedule& s, int t, int d) {
  if (!s.rho_bar || !s.rho_underbar || !s.z) {
    throw ConfigError("beta_private: accuracy triple (rho_bar, rho_underbar, "
                      "z) not set");
  }
  if (t < 1) throw RangeError("beta: t must be >= 1");
  const double rb = *s.rho_bar;
  const double ru = *s.rho_underbar;
  const double inner = 2.0 * std::log(2.0 / s.alpha) +
                       d * std::log(rb / ru + double(t) / (d * ru));
  return s.sigma * std::sqrt(inner) + s.m * s.c * std::sqrt(rb) + s.m * *s.z;
}

inline double beta_private(const BetaSchedule& s, int t, int d) {
  const double r = sqrt_beta_private(s, t, d);
  return r * r;
}

inline double beta_at(const BetaSchedule& s, int t, int d) {
  return s.mode == BetaMode::kPrivate ? beta_private(s, t, d)
                                      : beta_nonprivate(s, t, d);
}

struct ActResult {
  int action = 0;
  Policy policy;
  Vec theta_opt;
  Ellipsoid region;  // confidence region used this round
  Vec widths;        // ||x(a)||_{V^{-1}} per action
  int pgd_iters = 0;
};

// Inverse-CDF draw from a policy.
inline int sample_action(const Policy& p, Stream& rng) {
  const double u = rng.Uniform();
  double acc = 0.0;
  for (int a = 0; a < p.size(); ++a) {
    acc += p[a];
    if (u < acc) return a;
  }
  return p.size() - 1;
}

// Estimate, pick the optimistic parameter, build the fair policy, sample.
// `pgd_rng` feeds optimizer restarts, `action_rng` the arm draw.
inline ActResult act(AgentState& state, const ContextSet& ctx, double beta_t,
                     const MeritFn& f, const PgdConfig& cfg, Stream& pgd_rng,
                     Stream& action_rng) {
  const SymMat v = state.gram();
  const SpdFactor factor(v);
  state.theta_hat = factor.Solve(state.reward_vector());

  ActResult out;
  out.region = Ellipsoid{state.theta_hat, v, std::sqrt(std::max(0.0, beta_t))};
  const PgdResult opt = optimistic_theta(out.region, ctx, f, cfg, pgd_rng,
                                         state.last_theta_opt);
  out.theta_opt = opt.theta;
  out.pgd_iters = opt.iters;
  out.policy = construct_policy(opt.theta, ctx, f);
  out.action = sample_action(out.policy, action_rng);
  out.widths.resize(ctx.num_arms());
  for (int a = 0; a < ctx.num_arms(); ++a) {
    out.widths(a) = factor.InverseNorm(ctx.arm(a));
  }
  state.last_theta_opt = opt.theta;
  return out;
}

// S += x x^T, s += y x, and the same for the own and running sums.
inline void update(AgentState& state, const Vec& x, double y) {
  state.local_gram = rank_one_update(state.local_gram, x);
  state.local_reward += y * x;
  state.own_gram = rank_one_update(state.own_gram, x);
  state.own_reward += y * x;
  state.cumulative_gram = rank_one_update(state.cumulative_gram, x);
  state.cumulative_reward += y * x;
  ++state.delta;
}

}  // namespace fairfed

#endif  // FAIRFED_AGENT_HPP_
