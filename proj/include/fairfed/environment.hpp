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

// Synthetic linear-reward problems: a hidden parameter, per-agent per-round
// context sets drawn uniformly from the unit cube, and Gaussian reward noise.

#ifndef FAIRFED_ENVIRONMENT_HPP_
#define FAIRFED_ENVIRONMENT_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "fairfed/errors.hpp"
#include "fairfed/numkit.hpp"
#include "fairfed/rng.hpp"
#include "json.hpp"

namespace fairfed {

// kRaw samples contexts in [0,1]^d (norm up to sqrt(d)); kCapUnit rescales
// each context into the unit ball, which the regret analysis assumes.
enum class NormMode { kRaw, kCapUnit };

inline std::string_view ToString(NormMode mode) {
  return mode == NormMode::kRaw ? "raw" : "cap_unit";
}

inline NormMode ParseNormMode(std::string_view s) {
  if (s == "raw") return NormMode::kRaw;
  if (s == "cap_unit") return NormMode::kCapUnit;
  throw ConfigError("unknown norm mode '" + std::string(s) + "'");
}

struct Instance {
  Vec theta_star;
  int d = 0;
  int k = 0;  // number of actions
  int m = 0;  // number of agents
  int t = 0;  // horizon
  double sigma = 0.1;
  double c = 1.0;  // bound on ||theta_star||_2
  std::uint64_t seed = 0;
  NormMode norm_mode = NormMode::kRaw;

  // Largest context norm this instance can produce (L_x).
  double context_norm_cap() const {
    return norm_mode == NormMode::kCapUnit ? 1.0 : std::sqrt(double(d));
  }
};

// K contexts for one (round, agent); row a is x(a).
struct ContextSet {
  Eigen::MatrixXd x;
  int agent = 0;
  int round = 0;

  int num_arms() const { return static_cast<int>(x.rows()); }
  Vec arm(int a) const { return x.row(a).transpose(); }
};

// theta_star ~ U[0,1]^d, shrunk onto the ball of radius c when it falls
// outside it.
inline Instance gen_instance(int d, int k, int m, int t, double sigma,
                             std::uint64_t seed, NormMode norm_mode,
                             double c = 1.0) {
  if (d < 1 || k < 1 || m < 1 || t < 1) {
    throw ConfigError("gen_instance: sizes must be positive");
  }
  if (sigma < 0.0 || !(c > 0.0)) {
    throw ConfigError("gen_instance: need sigma >= 0 and c > 0");
  }
  Instance inst;
  inst.d = d;
  inst.k = k;
  inst.m = m;
  inst.t = t;
  inst.sigma = sigma;
  inst.c = c;
  inst.seed = seed;
  inst.norm_mode = norm_mode;
  Stream rng = Stream::For(seed, Purpose::kTheta);
  inst.theta_star.resize(d);
  for (int j = 0; j < d; ++j) inst.theta_star(j) = rng.Uniform();
  const double norm = inst.theta_star.norm();
  if (norm > c) inst.theta_star *= c / (norm * (1.0 + 1e-15));
  return inst;
}

// Contexts for agent i (1-based) at round t (1-based). Each arm has its own
// stream keyed by (seed, t, i, a).
inline ContextSet draw_contexts(const Instance& inst, int t, int i) {
  if (t < 1 || t > inst.t || i < 1 || i > inst.m) {
    throw RangeError("draw_contexts: (t=" + std::to_string(t) +
                     ", i=" + std::to_string(i) + ") out of range");
  }
  ContextSet ctx;
  ctx.agent = i;
  ctx.round = t;
  ctx.x.resize(inst.k, inst.d);
  for (int a = 0; a < inst.k; ++a) {
    Stream rng = Stream::For(inst.seed, Purpose::kContext,
                             {std::uint64_t(t), std::uint64_t(i),
                              std::uint64_t(a)});
    for (int j = 0; j < inst.d; ++j) ctx.x(a, j) = rng.Uniform();
    if (inst.norm_mode == NormMode::kCapUnit) {
      const double scale = std::max(1.0, ctx.x.row(a).norm() * (1.0 + 1e-12));
      ctx.x.row(a) /= scale;
    }
  }
  return ctx;
}

// Noise stream for the reward agent i observes at round t when playing a.
inline Stream reward_stream(const Instance& inst, int t, int i, int a) {
  return Stream::For(inst.seed, Purpose::kRewardNoise,
                     {std::uint64_t(t), std::uint64_t(i), std::uint64_t(a)});
}

// theta_star . x + eta, eta ~ N(0, sigma^2).
inline double reward(const Instance& inst, const Vec& x, Stream& rng) {
  const double mean = inst.theta_star.dot(x);
  if (inst.sigma == 0.0) return mean;
  return mean + inst.sigma * rng.Normal();
}

inline nlohmann::json to_json(const Instance& inst) {
  nlohmann::json theta = nlohmann::json::array();
  for (int j = 0; j < inst.d; ++j) theta.push_back(inst.theta_star(j));
  return {{"d", inst.d},
          {"k", inst.k},
          {"m", inst.m},
          {"t", inst.t},
          {"sigma", inst.sigma},
          {"c", inst.c},
          {"seed", inst.seed},
          {"norm_mode", std::string(ToString(inst.norm_mode))},
          {"theta_star", theta}};
}

}  // namespace fairfed

#endif  // FAIRFED_ENVIRONMENT_HPP_
