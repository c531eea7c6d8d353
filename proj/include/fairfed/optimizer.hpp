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

// Optimistic parameter selection: maximize the expected reward of the
// exposure-fair policy over the confidence ellipsoid
//
//   { theta : ||theta - center||_V <= radius }
//
// by multi-start projected gradient ascent. Steps are taken along V^{-1} g
// and normalized in the V-metric, so the step length is a fraction of the
// ellipsoid radius whatever the conditioning of V. Projection is radial in
// the V-metric, which is exact and closed-form.

#ifndef FAIRFED_OPTIMIZER_HPP_
#define FAIRFED_OPTIMIZER_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "fairfed/environment.hpp"
#include "fairfed/errors.hpp"
#include "fairfed/fairness.hpp"
#include "fairfed/numkit.hpp"
#include "fairfed/rng.hpp"
#include "json.hpp"

namespace fairfed {

struct Ellipsoid {
  Vec center;
  SymMat metric;
  double radius = 0.0;

  bool Contains(const Vec& theta) const {
    return hnorm(theta - center, metric) <= radius * (1.0 + 1e-9);
  }
};

struct PgdConfig {
  int max_iters = 50;
  double step0 = 0.5;
  double backtrack = 0.5;
  int restarts = 3;
  double grad_tol = 1e-7;
  bool warm_start = true;

  void Validate() const {
    if (max_iters < 1 || !(step0 > 0.0) || !(backtrack > 0.0) ||
        !(backtrack < 1.0) || restarts < 1 || !(grad_tol > 0.0)) {
      throw ConfigError("PgdConfig: parameters must be positive, backtrack < 1");
    }
  }
};

inline nlohmann::json to_json(const PgdConfig& cfg) {
  return {{"max_iters", cfg.max_iters}, {"step0", cfg.step0},
          {"backtrack", cfg.backtrack}, {"restarts", cfg.restarts},
          {"grad_tol", cfg.grad_tol},   {"warm_start", cfg.warm_start},
          {"projection", "radial_v_metric"},
          {"starts", "center+warm+boundary_uniform"}};
}

// sum_a w_a(theta) * (theta . x(a)) with w the fair policy at theta.
inline double objective(const Vec& theta, const ContextSet& ctx,
                        const MeritFn& f) {
  const Vec scores = ctx.x * theta;
  return policy_from_scores(scores, f).probs.dot(scores);
}

// Analytic gradient of objective() for the exponential merit family:
//   E_w[x] + c_f (E_w[s x] - E_w[s] E_w[x]).
inline Vec gradient(const Vec& theta, const ContextSet& ctx,
                    const MeritFn& f) {
  const Vec scores = ctx.x * theta;
  const Vec w = policy_from_scores(scores, f).probs;
  const Vec ex = ctx.x.transpose() * w;
  const Vec esx = ctx.x.transpose() * w.cwiseProduct(scores);
  const double es = w.dot(scores);
  return ex + f.steepness() * (esx - es * ex);
}

// Radial projection onto the ellipsoid in its own metric.
inline Vec project(const Vec& theta, const Ellipsoid& e) {
  if (e.radius <= 0.0) return e.center;
  const Vec diff = theta - e.center;
  const double dist = hnorm(diff, e.metric);
  // The slack keeps projection idempotent under round-off.
  if (dist <= e.radius * (1.0 + 1e-12)) return theta;
  return e.center + (e.radius / dist) * diff;
}

struct PgdResult {
  Vec theta;
  double value = 0.0;
  int iters = 0;  // accepted ascent steps summed over all starts
};

namespace internal {

// One ascent run from `start`; never accepts a non-improving iterate.
inline void Ascend(Vec theta, const Ellipsoid& e, const SpdFactor& factor,
                   const ContextSet& ctx, const MeritFn& f,
                   const PgdConfig& cfg, PgdResult& best) {
  double value = objective(theta, ctx, f);
  double step = cfg.step0;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const Vec g = gradient(theta, ctx, f);
    const Vec dir = factor.Solve(g);
    const double gain_rate = std::sqrt(std::max(0.0, g.dot(dir)));
    if (!(e.radius * gain_rate > cfg.grad_tol)) break;
    const Vec unit = dir / gain_rate;  // ||unit||_V == 1
    double improvement = 0.0;
    for (int bt = 0; bt < 40; ++bt) {
      const Vec cand = project(theta + (step * e.radius) * unit, e);
      const double cand_value = objective(cand, ctx, f);
      if (cand_value > value) {
        improvement = cand_value - value;
        theta = cand;
        value = cand_value;
        ++best.iters;
        step = std::min(cfg.step0, step / cfg.backtrack);
        break;
      }
      step *= cfg.backtrack;
      if (step * e.radius * gain_rate <= 1e-16 * (1.0 + std::abs(value))) break;
    }
    if (improvement <= cfg.grad_tol * (1.0 + std::abs(value))) break;
  }
  if (value > best.value) {
    best.value = value;
    best.theta = theta;
  }
}

}  // namespace internal

// Best feasible point found from one start at the center, one at
// `warm_start` (projected) when given, one at the best per-arm optimistic
// point, and restarts - 1 starts drawn uniformly on the ellipsoid boundary. The returned value is never below
// objective(center).
inline PgdResult optimistic_theta(const Ellipsoid& e, const ContextSet& ctx,
                                  const MeritFn& f, const PgdConfig& cfg,
                                  Stream& rng,
                                  const std::optional<Vec>& warm_start = {}) {
  PgdResult best;
  best.theta = e.center;
  best.value = objective(e.center, ctx, f);
  if (e.radius <= 0.0) return best;
  const SpdFactor factor(e.metric);
  internal::Ascend(e.center, e, factor, ctx, f, cfg, best);
  if (cfg.warm_start && warm_start && warm_start->size() == e.center.size()) {
    internal::Ascend(project(*warm_start, e), e, factor, ctx, f, cfg, best);
  }
  // Best of the per-arm optimistic points c + r V^{-1} x_a / ||x_a||_{V^{-1}}.
  std::optional<Vec> vertex;
  double vertex_value = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < ctx.num_arms(); ++a) {
    const Vec x = ctx.arm(a);
    const Vec dir = factor.Solve(x);
    const double norm = std::sqrt(std::max(0.0, x.dot(dir)));
    if (!(norm > 0.0)) continue;
    const Vec cand = project(e.center + (e.radius / norm) * dir, e);
    const double v = objective(cand, ctx, f);
    if (v > vertex_value) {
      vertex_value = v;
      vertex = cand;
    }
  }
  if (vertex) internal::Ascend(*vertex, e, factor, ctx, f, cfg, best);
  const int d = static_cast<int>(e.center.size());
  for (int r = 1; r < cfg.restarts; ++r) {
    Vec z(d);
    for (int j = 0; j < d; ++j) z(j) = rng.Normal();
    const double n = z.norm();
    if (!(n > 0.0)) continue;
    z *= e.radius / n;
    internal::Ascend(project(e.center + factor.FromWhitened(z), e), e, factor,
                     ctx, f, cfg, best);
  }
  return best;
}

}  // namespace fairfed

#endif  // FAIRFED_OPTIMIZER_HPP_
