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

// Experiment runner: expands an experiment id into algorithm variants,
// runs every (variant, seed) pair on paired random streams, aggregates the
// regret curves over seeds and writes CSV / JSON outputs.

#ifndef FAIRFED_HARNESS_HPP_
#define FAIRFED_HARNESS_HPP_

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "fairfed/environment.hpp"
#include "fairfed/errors.hpp"
#include "fairfed/federation.hpp"
#include "fairfed/io.hpp"
#include "fairfed/optimizer.hpp"
#include "json.hpp"

namespace fairfed {

enum class ExpId { kExp1, kExp2, kExp3, kExp4, kCustom };

inline std::string ToString(ExpId id) {
  switch (id) {
    case ExpId::kExp1: return "exp1";
    case ExpId::kExp2: return "exp2";
    case ExpId::kExp3: return "exp3";
    case ExpId::kExp4: return "exp4";
    case ExpId::kCustom: return "custom";
  }
  return "?";
}

inline ExpId ParseExpId(std::string_view s) {
  if (s == "exp1") return ExpId::kExp1;
  if (s == "exp2") return ExpId::kExp2;
  if (s == "exp3") return ExpId::kExp3;
  if (s == "exp4") return ExpId::kExp4;
  if (s == "custom") return ExpId::kCustom;
  throw ConfigError("unknown experiment '" + std::string(s) + "'");
}

enum class Preset { kPaper, kDesk };

struct ExperimentConfig {
  ExpId exp_id = ExpId::kExp1;
  int T = 100000;
  std::vector<int> m = {10};  // several values only for exp3
  int d = 5;
  int K = 10;
  double sigma = 0.1;
  std::vector<double> epsilon = {2.0};  // several values only for exp4
  double delta = 0.1;
  double alpha = 0.1;
  double lambda = 1.0;
  double c_f = 10.0;
  double c = 1.0;  // bound on ||theta_star||
  ProtocolSpec protocol;  // custom only
  bool privacy = false;   // custom only
  double b1_threshold = 1.0;  // D of the determinant-trigger baseline
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  NormMode norm_mode = NormMode::kRaw;
  PgdConfig pgd;
  std::string output_dir;
  bool write_round_logs = false;
};

// Paper-scale or desk-scale defaults for an experiment.
inline ExperimentConfig preset_config(ExpId id, Preset preset) {
  ExperimentConfig cfg;
  cfg.exp_id = id;
  if (preset == Preset::kPaper) {
    cfg.T = 100000;
    cfg.m = {10};
    cfg.seeds = {1, 2, 3, 4, 5};
    if (id == ExpId::kExp3) cfg.m = {10, 20, 30, 40};
  } else {
    cfg.T = 20000;
    cfg.m = {5};
    cfg.seeds = {1, 2, 3};
    if (id == ExpId::kExp3) {
      cfg.T = 10000;
      cfg.m = {2, 4, 8, 16};
    }
  }
  if (id == ExpId::kExp4) cfg.epsilon = {0.1, 1.0, 10.0};
  return cfg;
}

inline void validate(const ExperimentConfig& cfg) {
  if (cfg.seeds.empty()) throw ConfigError("config: seeds must be non-empty");
  if (cfg.T < 1 || cfg.d < 1 || cfg.K < 1) {
    throw ConfigError("config: T, d, K must be positive");
  }
  if (cfg.m.empty() || std::any_of(cfg.m.begin(), cfg.m.end(),
                                   [](int v) { return v < 1; })) {
    throw ConfigError("config: agent counts must be positive");
  }
  if (cfg.m.size() > 1 && cfg.exp_id != ExpId::kExp3) {
    throw ConfigError("config: several agent counts are only valid for exp3");
  }
  if (cfg.epsilon.empty() ||
      std::any_of(cfg.epsilon.begin(), cfg.epsilon.end(),
                  [](double e) { return !(e > 0.0); })) {
    throw ConfigError("config: epsilon values must be positive");
  }
  if (cfg.epsilon.size() > 1 && cfg.exp_id != ExpId::kExp4) {
    throw ConfigError("config: several epsilon values are only valid for exp4");
  }
  if (!(cfg.delta > 0.0 && cfg.delta < 1.0) ||
      !(cfg.alpha > 0.0 && cfg.alpha < 1.0)) {
    throw ConfigError("config: delta and alpha must lie in (0, 1)");
  }
  if (!(cfg.lambda > 0.0) || !(cfg.c_f > 0.0) || cfg.sigma < 0.0 ||
      !(cfg.c > 0.0)) {
    throw ConfigError("config: lambda, c_f, c must be > 0 and sigma >= 0");
  }
  if (cfg.exp_id == ExpId::kCustom && cfg.privacy &&
      cfg.protocol.kind == Protocol::kEveryRound) {
    throw ConfigError(
        "config: privacy=dp with protocol=every_round spends the privacy "
        "budget on every round; use a sparse protocol");
  }
  cfg.pgd.Validate();
}

inline nlohmann::json to_json(const ExperimentConfig& cfg) {
  return {{"exp_id", ToString(cfg.exp_id)},
          {"T", cfg.T},
          {"m", cfg.m},
          {"d", cfg.d},
          {"K", cfg.K},
          {"sigma", cfg.sigma},
          {"epsilon", cfg.epsilon},
          {"delta", cfg.delta},
          {"alpha", cfg.alpha},
          {"lambda", cfg.lambda},
          {"c_f", cfg.c_f},
          {"c", cfg.c},
          {"protocol", ToString(cfg.protocol)},
          {"privacy", cfg.privacy ? "dp" : "none"},
          {"b1_threshold", cfg.b1_threshold},
          {"seeds", cfg.seeds},
          {"norm_mode", std::string(ToString(cfg.norm_mode))},
          {"pgd", to_json(cfg.pgd)},
          {"output_dir", cfg.output_dir},
          {"write_round_logs", cfg.write_round_logs}};
}

// Overlays the fields present in `j` onto `cfg`. Unknown keys are errors.
inline void apply_json(ExperimentConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config file: expected a JSON object");
  auto as_int_list = [](const nlohmann::json& v) {
    return v.is_array() ? v.get<std::vector<int>>()
                        : std::vector<int>{v.get<int>()};
  };
  auto as_double_list = [](const nlohmann::json& v) {
    return v.is_array() ? v.get<std::vector<double>>()
                        : std::vector<double>{v.get<double>()};
  };
  try {
    for (const auto& [key, v] : j.items()) {
      if (key == "exp_id") cfg.exp_id = ParseExpId(v.get<std::string>());
      else if (key == "T") cfg.T = v.get<int>();
      else if (key == "m") cfg.m = as_int_list(v);
      else if (key == "d") cfg.d = v.get<int>();
      else if (key == "K") cfg.K = v.get<int>();
      else if (key == "sigma") cfg.sigma = v.get<double>();
      else if (key == "epsilon") cfg.epsilon = as_double_list(v);
      else if (key == "delta") cfg.delta = v.get<double>();
      else if (key == "alpha") cfg.alpha = v.get<double>();
      else if (key == "lambda") cfg.lambda = v.get<double>();
      else if (key == "c_f") cfg.c_f = v.get<double>();
      else if (key == "c") cfg.c = v.get<double>();
      else if (key == "protocol") cfg.protocol = ParseProtocol(v.get<std::string>());
      else if (key == "privacy") {
        const std::string p = v.get<std::string>();
        if (p != "dp" && p != "none") throw ConfigError("privacy must be dp|none");
        cfg.privacy = p == "dp";
      }
      else if (key == "b1_threshold") cfg.b1_threshold = v.get<double>();
      else if (key == "seeds") cfg.seeds = v.get<std::vector<std::uint64_t>>();
      else if (key == "norm_mode") cfg.norm_mode = ParseNormMode(v.get<std::string>());
      else if (key == "output_dir") cfg.output_dir = v.get<std::string>();
      else if (key == "write_round_logs") cfg.write_round_logs = v.get<bool>();
      else if (key == "pgd") {
        for (const auto& [pk, pv] : v.items()) {
          if (pk == "max_iters") cfg.pgd.max_iters = pv.get<int>();
          else if (pk == "step0") cfg.pgd.step0 = pv.get<double>();
          else if (pk == "backtrack") cfg.pgd.backtrack = pv.get<double>();
          else if (pk == "restarts") cfg.pgd.restarts = pv.get<int>();
          else if (pk == "grad_tol") cfg.pgd.grad_tol = pv.get<double>();
          else if (pk == "warm_start") cfg.pgd.warm_start = pv.get<bool>();
          else if (pk == "projection" || pk == "starts") continue;
          else throw ConfigError("unknown pgd key '" + pk + "'");
        }
      }
      else throw ConfigError("unknown config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config file: ") + e.what());
  }
}

// Fingerprint of everything that influences results.
inline std::string config_hash(const ExperimentConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j.erase("output_dir");
  j.erase("write_round_logs");
  return HexU64(Fnv1a64(j.dump()));
}

struct Variant {
  std::string name;
  ProtocolSpec protocol;
  bool private_mode = false;
  double epsilon = 2.0;
  int m = 1;
};

inline std::vector<Variant> expand_variants(const ExperimentConfig& cfg) {
  const ProtocolSpec proposed{Protocol::kProposed};
  const ProtocolSpec none{Protocol::kNone};
  const ProtocolSpec b1{Protocol::kDetTrigger, 1, cfg.b1_threshold};
  const ProtocolSpec b2{Protocol::kDoubling};
  const double eps = cfg.epsilon.front();
  const int m = cfg.m.front();
  std::vector<Variant> out;
  switch (cfg.exp_id) {
    case ExpId::kExp1:
      out = {{"b0", none, false, eps, m},
             {"fed", proposed, false, eps, m},
             {"priv", proposed, true, eps, m}};
      break;
    case ExpId::kExp2:
      out = {{"priv", proposed, true, eps, m},
             {"b1_approx", b1, true, eps, m},
             {"b2_approx", b2, true, eps, m}};
      break;
    case ExpId::kExp3:
      for (int mv : cfg.m) {
        out.push_back({"fed_m" + std::to_string(mv), proposed, false, eps, mv});
        out.push_back({"priv_m" + std::to_string(mv), proposed, true, eps, mv});
      }
      break;
    case ExpId::kExp4:
      out.push_back({"b0", none, false, eps, m});
      for (double e : cfg.epsilon) {
        char label[32];
        std::snprintf(label, sizeof(label), "priv_eps%g", e);
        out.push_back({label, proposed, true, e, m});
      }
      break;
    case ExpId::kCustom:
      out = {{"custom", cfg.protocol, cfg.privacy, eps, m}};
      break;
  }
  return out;
}

struct Aggregate {
  std::vector<double> mean;
  std::vector<double> lo;
  std::vector<double> hi;
};

// Pointwise mean with min / max envelope.
inline Aggregate aggregate(const std::vector<std::vector<double>>& curves) {
  if (curves.empty()) throw InvariantError("aggregate: no curves");
  const std::size_t n = curves.front().size();
  for (const auto& c : curves) {
    if (c.size() != n) throw InvariantError("aggregate: curve length mismatch");
  }
  Aggregate out;
  out.mean.assign(n, 0.0);
  out.lo = curves.front();
  out.hi = curves.front();
  for (const auto& c : curves) {
    for (std::size_t t = 0; t < n; ++t) {
      out.mean[t] += c[t];
      out.lo[t] = std::min(out.lo[t], c[t]);
      out.hi[t] = std::max(out.hi[t], c[t]);
    }
  }
  for (double& v : out.mean) v /= double(curves.size());
  return out;
}

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  RunResult run;
  nlohmann::json instance;
};

struct RunSummary {
  std::string variant;
  std::string config_hash;
  Aggregate fr;                 // cumulative fairness regret
  std::vector<double> rr_mean;  // cumulative reward regret
  std::vector<int> sync_counts;  // per surviving seed
  std::int64_t total_bytes = 0;  // summed over surviving seeds
  double wall_time = 0.0;        // seconds, summed over seeds
  std::vector<std::uint64_t> seeds_ok;
  std::vector<std::pair<std::uint64_t, std::string>> seeds_failed;
  std::vector<std::uint64_t> trace_digests;  // per surviving seed
  Variant spec;
  std::vector<SyncEvent> first_seed_syncs;
  nlohmann::json provenance;

  double final_fr() const { return fr.mean.empty() ? 0.0 : fr.mean.back(); }
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunSummary> variants;

  const RunSummary& at(std::string_view name) const {
    for (const auto& v : variants) {
      if (v.variant == name) return v;
    }
    throw ConfigError("no variant named '" + std::string(name) + "'");
  }
};

// Worker count: FAIRFED_THREADS if set and positive, else the hardware
// concurrency.
inline int default_threads() {
  if (const char* env = std::getenv("FAIRFED_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace internal {

inline void write_text(const std::filesystem::path& path,
                       const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write " + path.string());
  os << text;
}

inline void write_outputs(const ExperimentConfig& cfg, const RunSummary& s,
                          const std::vector<SeedOutcome>& outcomes) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(cfg.output_dir) / ToString(cfg.exp_id) / s.variant;
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "curve.csv", std::ios::binary);
    if (!os) throw ConfigError("cannot write " + (dir / "curve.csv").string());
    os << "t,fr_cum_mean,fr_env_lo,fr_env_hi,rr_cum_mean\n";
    for (std::size_t t = 0; t < s.fr.mean.size(); ++t) {
      os << (t + 1) << ',' << FormatReal(s.fr.mean[t]) << ','
         << FormatReal(s.fr.lo[t]) << ',' << FormatReal(s.fr.hi[t]) << ','
         << FormatReal(s.rr_mean[t]) << '\n';
    }
  }
  {
    std::ofstream os(dir / "sync.csv", std::ios::binary);
    if (!os) throw ConfigError("cannot write " + (dir / "sync.csv").string());
    write_sync_csv(os, s.first_seed_syncs);
  }
  if (cfg.write_round_logs) {
    std::ofstream os(dir / "rounds.csv", std::ios::binary);
    if (!os) throw ConfigError("cannot write " + (dir / "rounds.csv").string());
    std::vector<RoundLog> all;
    for (const SeedOutcome& o : outcomes) {
      if (o.ok) all.insert(all.end(), o.run.logs.begin(), o.run.logs.end());
    }
    write_round_logs_csv(os, all);
  }
  write_text(dir / "provenance.json", s.provenance.dump(2) + "\n");
}

}  // namespace internal

// Runs every variant of the experiment over all seeds. Jobs are
// independent and scheduled over `threads` workers; results are assembled
// in a fixed order, so outputs do not depend on the worker count. Writes
// files when cfg.output_dir is non-empty.
inline ExperimentResult run_experiment(const ExperimentConfig& cfg,
                                       int threads = default_threads()) {
  validate(cfg);
  const std::vector<Variant> variants = expand_variants(cfg);
  const std::size_t n_seeds = cfg.seeds.size();
  const std::size_t n_jobs = variants.size() * n_seeds;
  std::vector<SeedOutcome> outcomes(n_jobs);
  std::vector<double> job_time(n_jobs, 0.0);

  auto run_job = [&](std::size_t job) {
    const Variant& v = variants[job / n_seeds];
    const std::uint64_t seed = cfg.seeds[job % n_seeds];
    SeedOutcome& out = outcomes[job];
    out.seed = seed;
    const auto start = std::chrono::steady_clock::now();
    try {
      const Instance inst = gen_instance(cfg.d, cfg.K, v.m, cfg.T, cfg.sigma,
                                         seed, cfg.norm_mode, cfg.c);
      out.instance = to_json(inst);
      FederationConfig fc;
      fc.run_id = ToString(cfg.exp_id) + "/" + v.name;
      fc.protocol = v.protocol;
      fc.private_mode = v.private_mode;
      fc.epsilon = v.epsilon;
      fc.delta = cfg.delta;
      fc.alpha = cfg.alpha;
      fc.lambda = cfg.lambda;
      fc.steepness = cfg.c_f;
      fc.pgd = cfg.pgd;
      fc.keep_round_logs = cfg.write_round_logs;
      out.run = run_federation(inst, fc);
      out.ok = out.run.completed;
      out.error = out.run.error;
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
    job_time[job] = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - start)
                        .count();
  };

  const int workers = static_cast<int>(
      std::min<std::size_t>(std::max(1, threads), n_jobs));
  if (workers <= 1) {
    for (std::size_t j = 0; j < n_jobs; ++j) run_job(j);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < n_jobs; j = next++) run_job(j);
      });
    }
    for (auto& th : pool) th.join();
  }

  ExperimentResult result;
  result.config = cfg;
  const std::string hash = config_hash(cfg);
  for (std::size_t vi = 0; vi < variants.size(); ++vi) {
    const Variant& v = variants[vi];
    RunSummary s;
    s.variant = v.name;
    s.spec = v;
    s.config_hash = hash;
    std::vector<std::vector<double>> fr_curves;
    std::vector<std::vector<double>> rr_curves;
    nlohmann::json instances = nlohmann::json::array();
    nlohmann::json per_seed = nlohmann::json::array();
    const RunResult* first = nullptr;
    for (std::size_t si = 0; si < n_seeds; ++si) {
      const std::size_t job = vi * n_seeds + si;
      const SeedOutcome& o = outcomes[job];
      s.wall_time += job_time[job];
      if (!o.ok) {
        s.seeds_failed.emplace_back(o.seed, o.error);
        per_seed.push_back({{"seed", o.seed}, {"ok", false}, {"error", o.error}});
        continue;
      }
      if (first == nullptr) first = &o.run;
      fr_curves.push_back(o.run.fr_curve);
      rr_curves.push_back(o.run.rr_curve);
      s.sync_counts.push_back(o.run.sync_count);
      s.total_bytes += o.run.total_bytes;
      s.seeds_ok.push_back(o.seed);
      s.trace_digests.push_back(o.run.trace_digest);
      instances.push_back(o.instance);
      per_seed.push_back({{"seed", o.seed},
                          {"ok", true},
                          {"sync_count", o.run.sync_count},
                          {"max_gap", o.run.max_gap},
                          {"total_bytes", o.run.total_bytes},
                          {"final_fr", o.run.fr_curve.back()},
                          {"final_rr", o.run.rr_curve.back()},
                          {"coverage_misses", o.run.diag.coverage_misses},
                          {"lemma3_violations", o.run.diag.lemma3_violations},
                          {"trace_digest", HexU64(o.run.trace_digest)}});
    }
    if (first == nullptr) {
      throw Error("variant " + v.name + ": every seed failed (first error: " +
                  (s.seeds_failed.empty() ? "?" : s.seeds_failed.front().second) +
                  ")");
    }
    s.fr = aggregate(fr_curves);
    s.rr_mean = aggregate(rr_curves).mean;
    s.first_seed_syncs = first->syncs;

    nlohmann::json prov;
    prov["config"] = to_json(cfg);
    prov["config"].erase("output_dir");
    prov["config_hash"] = hash;
    prov["variant"] = {{"name", v.name},
                       {"protocol", ToString(v.protocol)},
                       {"protocol_approximation", v.protocol.approximate()},
                       {"privacy", v.private_mode ? "dp" : "none"},
                       {"epsilon", v.epsilon},
                       {"m", v.m}};
    prov["instances"] = instances;
    prov["seeds"] = per_seed;
    prov["warmup_threshold"] = first->warmup;
    prov["beta_schedule"] = to_json(first->beta);
    if (first->privacy) prov["privacy"] = to_json(*first->privacy);
    prov["pgd"] = to_json(cfg.pgd);
    prov["conventions"] = {
        {"schedule_log_base", "e"},
        {"tree_depth_log_base", "2"},
        {"theta_star", "uniform[0,1]^d, rescaled onto ||theta||<=c"},
        {"reward_regret", "expected-reward gap of the fair-optimal policy"},
        {"sync_csv", "events of the first surviving seed"},
        {"bytes_per_agent_per_sync", bytes_per_agent(cfg.d)}};
    s.provenance = std::move(prov);

    if (!cfg.output_dir.empty()) {
      std::vector<SeedOutcome> mine(outcomes.begin() + vi * n_seeds,
                                    outcomes.begin() + (vi + 1) * n_seeds);
      internal::write_outputs(cfg, s, mine);
    }
    result.variants.push_back(std::move(s));
  }
  return result;
}

}  // namespace fairfed

#endif  // FAIRFED_HARNESS_HPP_
