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

// Multi-agent round loop, communication schedules and pooling of
// sufficient statistics.
//
// Every round, each agent observes its contexts, acts and updates its local
// statistics; after all agents finished the round the schedule decides
// whether to synchronize. A synchronization pools every agent's cumulative
// statistics (exactly, or through its privatizer tree) into the shared
// (U, u) and resets the local (S, s).

#ifndef FAIRFED_FEDERATION_HPP_
#define FAIRFED_FEDERATION_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "fairfed/agent.hpp"
#include "fairfed/environment.hpp"
#include "fairfed/errors.hpp"
#include "fairfed/fairness.hpp"
#include "fairfed/io.hpp"
#include "fairfed/numkit.hpp"
#include "fairfed/optimizer.hpp"
#include "fairfed/privatizer.hpp"
#include "fairfed/rng.hpp"

namespace fairfed {

// kDetTrigger and kDoubling approximate the two external baseline
// protocols; kNone is the no-communication baseline.
enum class Protocol {
  kProposed,
  kEveryRound,
  kFixedInterval,
  kDetTrigger,
  kDoubling,
  kNone,
};

struct ProtocolSpec {
  Protocol kind = Protocol::kProposed;
  int interval = 1;        // kFixedInterval
  double threshold = 1.0;  // kDetTrigger

  bool approximate() const {
    return kind == Protocol::kDetTrigger || kind == Protocol::kDoubling;
  }
};

inline std::string ToString(const ProtocolSpec& p) {
  switch (p.kind) {
    case Protocol::kProposed:
      return "proposed";
    case Protocol::kEveryRound:
      return "every_round";
    case Protocol::kFixedInterval:
      return "fixed:" + std::to_string(p.interval);
    case Protocol::kDetTrigger:
      return "det:" + FormatReal(p.threshold);
    case Protocol::kDoubling:
      return "doubling";
    case Protocol::kNone:
      return "none";
  }
  return "?";
}

inline ProtocolSpec ParseProtocol(std::string_view s) {
  ProtocolSpec p;
  auto tail = [&](std::string_view prefix) -> std::string {
    return std::string(s.substr(prefix.size()));
  };
  try {
    if (s == "proposed") {
      p.kind = Protocol::kProposed;
    } else if (s == "every_round") {
      p.kind = Protocol::kEveryRound;
    } else if (s == "doubling") {
      p.kind = Protocol::kDoubling;
    } else if (s == "none") {
      p.kind = Protocol::kNone;
    } else if (s.starts_with("fixed:")) {
      p.kind = Protocol::kFixedInterval;
      std::size_t used = 0;
      const std::string arg = tail("fixed:");
      p.interval = std::stoi(arg, &used);
      if (used != arg.size() || p.interval < 1) throw ConfigError("");
    } else if (s.starts_with("det:")) {
      p.kind = Protocol::kDetTrigger;
      std::size_t used = 0;
      const std::string arg = tail("det:");
      p.threshold = std::stod(arg, &used);
      if (used != arg.size() || !(p.threshold > 0.0)) throw ConfigError("");
    } else {
      throw ConfigError("");
    }
  } catch (const std::exception&) {
    throw ConfigError("unknown protocol '" + std::string(s) +
                      "' (expected proposed|every_round|fixed:Q|det:D|"
                      "doubling|none)");
  }
  return p;
}

// ceil(T / (m d^2 ln^2(1 + T/d))), at least 1.
inline std::int64_t warmup_threshold(std::int64_t horizon, int m, int d) {
  if (horizon < 1 || m < 1 || d < 1) {
    throw ConfigError("warmup_threshold: arguments must be positive");
  }
  const double l = std::log1p(double(horizon) / d);
  const double q = std::ceil(double(horizon) / (double(m) * d * d * l * l));
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(q));
}

// ceil(2 m d^2 ln^2(1 + T/d)).
inline std::int64_t sync_bound(std::int64_t horizon, int m, int d) {
  if (horizon < 1 || m < 1 || d < 1) {
    throw ConfigError("sync_bound: arguments must be positive");
  }
  const double l = std::log1p(double(horizon) / d);
  return static_cast<std::int64_t>(std::ceil(2.0 * m * d * d * l * l));
}

struct SyncSchedule {
  ProtocolSpec protocol;
  std::int64_t tau = 1;     // next sync round (proposed / doubling)
  std::int64_t warmup = 1;  // Q
  int sync_count = 0;
  std::vector<std::int64_t> sync_rounds;

  static SyncSchedule Make(const ProtocolSpec& protocol, std::int64_t horizon,
                           int m, int d) {
    SyncSchedule s;
    s.protocol = protocol;
    s.warmup = warmup_threshold(horizon, m, d);
    return s;
  }

  void Record(std::int64_t t) {
    sync_rounds.push_back(t);
    ++sync_count;
  }

  std::int64_t max_gap() const {
    std::int64_t gap = 0;
    for (std::size_t j = 1; j < sync_rounds.size(); ++j) {
      gap = std::max(gap, sync_rounds[j] - sync_rounds[j - 1]);
    }
    return gap;
  }
};

// Decides whether round t ends with a synchronization and advances the
// schedule. Proposed protocol: tau starts at 1 and doubles while t < Q,
// then grows by Q. kDetTrigger is data dependent and is decided by the
// caller; this returns false for it.
inline bool advance_schedule(SyncSchedule& s, std::int64_t t) {
  bool sync = false;
  switch (s.protocol.kind) {
    case Protocol::kProposed:
      if (t == s.tau) {
        sync = true;
        s.tau = t < s.warmup ? 2 * s.tau : s.tau + s.warmup;
      }
      break;
    case Protocol::kDoubling:
      if (t == s.tau) {
        sync = true;
        s.tau *= 2;
      }
      break;
    case Protocol::kEveryRound:
      sync = true;
      break;
    case Protocol::kFixedInterval:
      sync = t % s.protocol.interval == 0;
      break;
    case Protocol::kDetTrigger:
    case Protocol::kNone:
      break;
  }
  if (sync) s.Record(t);
  return sync;
}

// Number of synchronizations a deterministic protocol performs over the
// horizon; the horizon itself for the data-dependent trigger.
inline std::int64_t planned_syncs(const ProtocolSpec& protocol,
                                  std::int64_t horizon, int m, int d) {
  if (protocol.kind == Protocol::kDetTrigger) return horizon;
  SyncSchedule s = SyncSchedule::Make(protocol, horizon, m, d);
  for (std::int64_t t = 1; t <= horizon; ++t) advance_schedule(s, t);
  return std::max<std::int64_t>(1, s.sync_count);
}

struct SharedPool {
  double ridge = 0.0;  // m * lambda once pooled
  SymMat gram;         // U without ridge
  Vec reward;          // u
};

struct SyncEvent {
  std::int64_t t = 0;
  std::int64_t bytes_communicated = 0;
  int sync_index = 0;
};

// Bytes one agent sends per synchronization: the d x (d+1) release in
// doubles.
inline std::int64_t bytes_per_agent(int d) {
  return std::int64_t(d) * (d + 1) * 8;
}

// Pools every agent's statistics. Without privatizers each agent
// contributes its exact running sums; with them, its privatized release.
// Afterwards every agent holds the other agents' contributions plus its
// own, ridge m * lambda, and zero local statistics. The returned pool is
// the sum of all contributions.
inline SharedPool synchronize(std::vector<AgentState>& agents, double lambda,
                              std::vector<NoiseTree>* trees,
                              const PrivacyParams* params) {
  if (agents.empty()) throw InvariantError("synchronize: no agents");
  const int d = agents.front().dim();
  const std::size_t n = agents.size();
  std::vector<SymMat> grams(n);
  std::vector<Vec> rewards(n);
  for (std::size_t k = 0; k < n; ++k) {
    AgentState& a = agents[k];
    if (trees != nullptr) {
      PrivateRelease rel;
      try {
        rel = privatize(a.cumulative_gram, a.cumulative_reward, a.local_gram,
                        a.local_reward, (*trees)[k], *params);
      } catch (const Error& e) {
        throw ConfigError("synchronize: privatizer failed for agent " +
                          std::to_string(a.id) + ": " + e.what());
      }
      grams[k] = std::move(rel.gram);
      rewards[k] = std::move(rel.reward);
    } else {
      grams[k] = a.cumulative_gram;
      rewards[k] = a.cumulative_reward;
    }
  }
  SharedPool pool;
  pool.ridge = lambda * double(n);
  pool.gram = SymMat::Zero(d);
  pool.reward = Vec::Zero(d);
  for (std::size_t k = 0; k < n; ++k) {
    pool.gram += grams[k];
    pool.reward += rewards[k];
  }
  for (std::size_t i = 0; i < n; ++i) {
    AgentState& a = agents[i];
    a.others_gram = SymMat::Zero(d);
    a.others_reward = Vec::Zero(d);
    for (std::size_t k = 0; k < n; ++k) {
      if (k == i) continue;
      a.others_gram += grams[k];
      a.others_reward += rewards[k];
    }
    a.own_gram = grams[i];
    a.own_reward = rewards[i];
    a.shared_ridge = pool.ridge;
    a.local_gram = SymMat::Zero(d);
    a.local_reward = Vec::Zero(d);
    a.delta = 0;
  }
  return pool;
}

struct RoundLog {
  std::string run_id;
  std::uint64_t seed = 0;
  std::string protocol;
  int t = 0;
  int i = 0;
  int action = 0;
  double reward = 0.0;
  double fr_instant = 0.0;
  double rr_instant = 0.0;
  double fr_cum_mean = 0.0;
  bool synced = false;
  double beta_t = 0.0;
  int pgd_iters = 0;
};

struct FederationConfig {
  std::string run_id = "run";
  ProtocolSpec protocol;
  bool private_mode = false;
  double epsilon = 2.0;
  double delta = 0.1;
  double alpha = 0.1;
  double lambda = 1.0;
  double steepness = 10.0;  // c_f
  PgdConfig pgd;
  // Simulated agents (1-based); empty means all of 1..m.
  std::vector<int> agents;
  // Privatizer with all noise switched off (testing).
  bool zero_noise = false;
  // Overrides the confidence radius schedule with a constant beta.
  std::optional<double> beta_override;
  // Prior mean for the ridge estimate (non-private only): u starts at
  // lambda * prior_mean, so theta_hat == prior_mean before any data.
  std::optional<Vec> prior_mean;
  bool keep_round_logs = true;
  // Called after every synchronization with the pooled statistics.
  std::function<void(std::int64_t, const SharedPool&,
                     const std::vector<AgentState>&)>
      on_sync;
};

// Runtime checks of the analysis, accumulated over a run.
struct RunDiagnostics {
  std::int64_t agent_rounds = 0;
  std::int64_t coverage_misses = 0;  // theta_star outside the region
  std::int64_t lemma3_checked = 0;
  std::int64_t lemma3_violations = 0;
  double lemma3_max_ratio = 0.0;  // max FR / bound over checked rounds
  // Per simulated agent.
  std::vector<double> potential_sum;       // sum_t min(1, w_t(a_t)^2)
  std::vector<double> width_played_sum;    // sum_t w_t(a_t)
  std::vector<double> width_expected_sum;  // sum_t E_{a~pi_t} w_t(a)
};

struct RunResult {
  std::vector<RoundLog> logs;
  std::vector<SyncEvent> syncs;
  std::vector<double> fr_curve;  // mean over agents of cumulative FR, per t
  std::vector<double> rr_curve;  // same for reward regret
  int sync_count = 0;
  std::int64_t total_bytes = 0;
  std::int64_t max_gap = 0;
  std::int64_t warmup = 0;
  BetaSchedule beta;
  std::optional<PrivacyParams> privacy;
  RunDiagnostics diag;
  std::vector<AgentState> final_agents;
  std::uint64_t trace_digest = 0;  // FNV over (t, i, contexts, rewards)
  bool completed = true;
  std::string error;
};

inline BetaSchedule make_beta_schedule(const Instance& inst,
                                       const FederationConfig& cfg,
                                       const PrivacyParams* privacy) {
  BetaSchedule b;
  b.sigma = inst.sigma;
  b.alpha = cfg.alpha;
  b.lambda = cfg.lambda;
  b.c = inst.c;
  b.m = cfg.protocol.kind == Protocol::kNone ? 1 : inst.m;
  b.context_norm = inst.context_norm_cap();
  if (privacy != nullptr) {
    b.mode = BetaMode::kPrivate;
    b.rho_bar = privacy->rho_bar;
    b.rho_underbar = privacy->rho_underbar;
    b.z = privacy->z;
  }
  return b;
}

// Merit function audited on the range of true mean rewards of the
// instance: contexts and theta_star are coordinatewise non-negative, so
// mu lies in [0, c L_x].
inline MeritFn make_merit(const Instance& inst, double steepness) {
  return MeritFn::Exponential(steepness, 0.0, inst.c * inst.context_norm_cap());
}

inline RunResult run_federation(const Instance& inst,
                                const FederationConfig& cfg) {
  cfg.pgd.Validate();
  if (cfg.private_mode && cfg.prior_mean) {
    throw ConfigError("run_federation: prior_mean is non-private only");
  }
  std::vector<int> ids = cfg.agents;
  if (ids.empty()) {
    for (int i = 1; i <= inst.m; ++i) ids.push_back(i);
  }
  for (int i : ids) {
    if (i < 1 || i > inst.m) throw ConfigError("run_federation: bad agent id");
  }
  const int d = inst.d;
  const int n_agents = static_cast<int>(ids.size());
  const MeritFn merit_fn = make_merit(inst, cfg.steepness);

  RunResult res;
  SyncSchedule schedule = SyncSchedule::Make(cfg.protocol, inst.t, inst.m, d);
  res.warmup = schedule.warmup;

  std::vector<NoiseTree> trees;
  if (cfg.private_mode) {
    const std::int64_t releases = planned_syncs(cfg.protocol, inst.t, inst.m, d);
    res.privacy =
        cfg.zero_noise
            ? zero_noise_params(inst.m, d, releases, cfg.lambda)
            : calibrate(cfg.epsilon, cfg.delta, inst.m, d,
                        inst.context_norm_cap(), releases, cfg.alpha,
                        cfg.lambda);
    trees.reserve(n_agents);
    for (int i : ids) {
      trees.emplace_back(d, res.privacy->depth, res.privacy->noise_sigma2,
                         Stream::For(inst.seed, Purpose::kTreeNoise,
                                     {std::uint64_t(i)}));
    }
  }
  res.beta = make_beta_schedule(inst, cfg, res.privacy ? &*res.privacy : nullptr);

  std::vector<AgentState> agents;
  for (int i : ids) {
    AgentState a = AgentState::Init(i, d, cfg.lambda);
    if (cfg.prior_mean) {
      a.own_reward = cfg.lambda * *cfg.prior_mean;
      a.cumulative_reward = a.own_reward;
    }
    agents.push_back(std::move(a));
  }
  std::vector<double> last_sync_logdet(n_agents, 0.0);
  std::int64_t last_sync_t = 0;
  if (cfg.protocol.kind == Protocol::kDetTrigger) {
    for (int k = 0; k < n_agents; ++k) {
      last_sync_logdet[k] = logdet(agents[k].gram());
    }
  }

  RunDiagnostics& diag = res.diag;
  diag.potential_sum.assign(n_agents, 0.0);
  diag.width_played_sum.assign(n_agents, 0.0);
  diag.width_expected_sum.assign(n_agents, 0.0);
  std::vector<double> fr_cum(n_agents, 0.0);
  std::vector<double> rr_cum(n_agents, 0.0);
  res.fr_curve.reserve(inst.t);
  res.rr_curve.reserve(inst.t);
  const std::string protocol_name = ToString(cfg.protocol);
  std::uint64_t digest = 0xcbf29ce484222325ULL;
  auto fold = [&digest](double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    digest = Mix64(digest ^ bits);
  };

  std::vector<RoundLog> round_buf(n_agents);
  try {
    for (int t = 1; t <= inst.t; ++t) {
      const double beta_t = cfg.beta_override
                                ? *cfg.beta_override
                                : beta_at(res.beta, t, d);
      for (int k = 0; k < n_agents; ++k) {
        const int i = ids[k];
        AgentState& agent = agents[k];
        const ContextSet ctx = draw_contexts(inst, t, i);
        Stream pgd_rng = Stream::For(inst.seed, Purpose::kPgd,
                                     {std::uint64_t(t), std::uint64_t(i)});
        Stream action_rng = Stream::For(inst.seed, Purpose::kAction,
                                        {std::uint64_t(t), std::uint64_t(i)});
        const ActResult ar =
            act(agent, ctx, beta_t, merit_fn, cfg.pgd, pgd_rng, action_rng);
        const Vec x = ctx.arm(ar.action);
        Stream noise = reward_stream(inst, t, i, ar.action);
        const double y = reward(inst, x, noise);
        update(agent, x, y);

        const Policy pi_star = optimal_policy(inst, ctx, merit_fn);
        const double fr = fairness_regret_instant(ar.policy, pi_star);
        const double rr =
            reward_regret_instant(ar.policy, pi_star, ctx, inst.theta_star);
        fr_cum[k] += fr;
        rr_cum[k] += rr;

        ++diag.agent_rounds;
        const double w_played = ar.widths(ar.action);
        const double w_expected = ar.policy.probs.dot(ar.widths);
        diag.potential_sum[k] += std::min(1.0, w_played * w_played);
        diag.width_played_sum[k] += w_played;
        diag.width_expected_sum[k] += w_expected;
        if (ar.region.Contains(inst.theta_star)) {
          const double bound = 4.0 * merit_fn.lipschitz() *
                               std::sqrt(std::max(0.0, beta_t)) /
                               merit_fn.gamma() * w_expected;
          ++diag.lemma3_checked;
          if (fr > bound * (1.0 + 1e-9) + 1e-12) ++diag.lemma3_violations;
          if (bound > 0.0) {
            diag.lemma3_max_ratio = std::max(diag.lemma3_max_ratio, fr / bound);
          }
        } else {
          ++diag.coverage_misses;
        }

        fold(double(t));
        fold(double(i));
        for (Eigen::Index r = 0; r < ctx.x.size(); ++r) fold(ctx.x.data()[r]);
        fold(y - inst.theta_star.dot(x));

        RoundLog& log = round_buf[k];
        log.run_id = cfg.run_id;
        log.seed = inst.seed;
        log.protocol = protocol_name;
        log.t = t;
        log.i = i;
        log.action = ar.action;
        log.reward = y;
        log.fr_instant = fr;
        log.rr_instant = rr;
        log.beta_t = beta_t;
        log.pgd_iters = ar.pgd_iters;
      }

      // Barrier: every agent finished round t.
      bool sync = advance_schedule(schedule, t);
      if (cfg.protocol.kind == Protocol::kDetTrigger) {
        for (int k = 0; k < n_agents && !sync; ++k) {
          const double gain = logdet(agents[k].gram()) - last_sync_logdet[k];
          if (double(t - last_sync_t) * gain > cfg.protocol.threshold) {
            sync = true;
          }
        }
        if (sync) schedule.Record(t);
      }
      if (sync) {
        const SharedPool pool =
            synchronize(agents, cfg.lambda, cfg.private_mode ? &trees : nullptr,
                        res.privacy ? &*res.privacy : nullptr);
        const std::int64_t bytes = bytes_per_agent(d) * n_agents;
        res.total_bytes += bytes;
        res.syncs.push_back(SyncEvent{t, bytes, schedule.sync_count});
        if (cfg.protocol.kind == Protocol::kDetTrigger) {
          last_sync_t = t;
          for (int k = 0; k < n_agents; ++k) {
            last_sync_logdet[k] = logdet(agents[k].gram());
          }
        }
        if (cfg.on_sync) cfg.on_sync(t, pool, agents);
      }

      double fr_mean = 0.0;
      double rr_mean = 0.0;
      for (int k = 0; k < n_agents; ++k) {
        fr_mean += fr_cum[k];
        rr_mean += rr_cum[k];
      }
      fr_mean /= n_agents;
      rr_mean /= n_agents;
      res.fr_curve.push_back(fr_mean);
      res.rr_curve.push_back(rr_mean);
      if (cfg.keep_round_logs) {
        for (RoundLog& log : round_buf) {
          log.fr_cum_mean = fr_mean;
          log.synced = sync;
          res.logs.push_back(log);
        }
      }
    }
  } catch (const Error& e) {
    res.completed = false;
    res.error = e.what();
  }
  res.sync_count = schedule.sync_count;
  res.max_gap = schedule.max_gap();
  res.final_agents = std::move(agents);
  res.trace_digest = digest;
  return res;
}

inline void write_round_logs_csv(std::ostream& os,
                                 const std::vector<RoundLog>& logs) {
  os << "run_id,seed,protocol,t,i,action,reward,fr_instant,rr_instant,"
        "fr_cum_mean,synced,beta_t,pgd_iters\n";
  for (const RoundLog& r : logs) {
    os << r.run_id << ',' << r.seed << ',' << r.protocol << ',' << r.t << ','
       << r.i << ',' << r.action << ',' << FormatReal(r.reward) << ','
       << FormatReal(r.fr_instant) << ',' << FormatReal(r.rr_instant) << ','
       << FormatReal(r.fr_cum_mean) << ',' << (r.synced ? 1 : 0) << ','
       << FormatReal(r.beta_t) << ',' << r.pgd_iters << '\n';
  }
}

inline void write_sync_csv(std::ostream& os,
                           const std::vector<SyncEvent>& events) {
  os << "t,bytes_communicated,sync_index\n";
  for (const SyncEvent& e : events) {
    os << e.t << ',' << e.bytes_communicated << ',' << e.sync_index << '\n';
  }
}

}  // namespace fairfed

#endif  // FAIRFED_FEDERATION_HPP_
