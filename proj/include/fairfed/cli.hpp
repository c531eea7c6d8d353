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

// Command-line front end of the experiment runner. Exit codes: 0 success,
// 1 runtime failure, 2 usage error.

#ifndef FAIRFED_CLI_HPP_
#define FAIRFED_CLI_HPP_

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "fairfed/harness.hpp"
#include "json.hpp"

namespace fairfed {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// Fixed-width table of per-variant results.
inline void print_summary(const ExperimentResult& r, std::ostream& os) {
  char line[256];
  std::snprintf(line, sizeof(line), "%-14s %12s %12s %12s %12s %8s %12s %9s\n",
                "variant", "fr_final", "fr_lo", "fr_hi", "rr_final",
                "syncs", "bytes", "wall_s");
  os << line;
  for (const RunSummary& s : r.variants) {
    double syncs = 0.0;
    for (int c : s.sync_counts) syncs += c;
    syncs /= double(s.sync_counts.size());
    std::snprintf(line, sizeof(line),
                  "%-14s %12.2f %12.2f %12.2f %12.2f %8.0f %12lld %9.2f\n",
                  s.variant.c_str(), s.final_fr(), s.fr.lo.back(),
                  s.fr.hi.back(), s.rr_mean.back(), syncs,
                  static_cast<long long>(s.total_bytes), s.wall_time);
    os << line;
    for (const auto& [seed, err] : s.seeds_failed) {
      os << "  seed " << seed << " failed: " << err << '\n';
    }
  }
  os << "config_hash " << (r.variants.empty() ? "" : r.variants[0].config_hash)
     << '\n';
}

inline int cli_main(int argc, const char* const* argv,
                    std::ostream& out = std::cout,
                    std::ostream& err = std::cerr) {
  CLI::App app{"Federated fair-exposure linear bandit experiments"};
  app.require_subcommand(1);
  CLI::App* run = app.add_subcommand("run", "run an experiment");

  std::string exp = "exp1";
  std::string preset = "desk";
  std::string config_path;
  std::optional<int> rounds, dim, arms, pgd_iters, pgd_restarts;
  std::vector<int> agents;
  std::vector<double> epsilons;
  std::optional<double> delta, alpha, lambda, sigma, steepness, b1_threshold;
  std::optional<std::string> protocol, privacy, norm;
  std::optional<int> num_seeds;
  std::vector<std::uint64_t> seed_list;
  std::string out_dir;
  std::optional<int> threads;
  bool round_logs = false;

  run->add_option("--exp", exp, "experiment id")
      ->check(CLI::IsMember({"exp1", "exp2", "exp3", "exp4", "custom"}));
  run->add_option("--preset", preset, "default scale")
      ->check(CLI::IsMember({"paper", "desk"}));
  run->add_option("--config", config_path, "JSON config; flags override it")
      ->check(CLI::ExistingFile);
  run->add_option("--rounds", rounds, "horizon T")->check(CLI::PositiveNumber);
  run->add_option("--agents", agents, "agent count(s); a list for exp3")
      ->delimiter(',');
  run->add_option("--dim", dim, "context dimension d")->check(CLI::PositiveNumber);
  run->add_option("--arms", arms, "actions per round K")->check(CLI::PositiveNumber);
  run->add_option("--epsilon", epsilons, "privacy budget(s); a list for exp4")
      ->delimiter(',');
  run->add_option("--delta", delta, "privacy delta");
  run->add_option("--alpha", alpha, "confidence failure probability");
  run->add_option("--lambda", lambda, "ridge");
  run->add_option("--sigma", sigma, "reward noise std");
  run->add_option("--steepness", steepness, "merit steepness c_f");
  run->add_option("--b1-threshold", b1_threshold, "determinant-trigger D");
  run->add_option("--protocol", protocol,
                  "proposed|every_round|fixed:Q|det:D|doubling|none (custom)");
  run->add_option("--privacy", privacy, "none|dp (custom)")
      ->check(CLI::IsMember({"none", "dp"}));
  auto* seeds_opt = run->add_option("--seeds", num_seeds, "use seeds 1..N")
                        ->check(CLI::PositiveNumber);
  run->add_option("--seed-list", seed_list, "explicit seeds")
      ->delimiter(',')
      ->excludes(seeds_opt);
  run->add_option("--norm", norm, "raw|cap_unit")
      ->check(CLI::IsMember({"raw", "cap_unit"}));
  run->add_option("--pgd-iters", pgd_iters, "PGD iterations per start");
  run->add_option("--pgd-restarts", pgd_restarts, "PGD starts");
  run->add_option("--threads", threads, "worker cap (default FAIRFED_THREADS)")
      ->check(CLI::PositiveNumber);
  run->add_flag("--round-logs", round_logs, "write per-round rounds.csv");
  run->add_option("--out", out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  ExperimentConfig cfg;
  try {
    cfg = preset_config(ParseExpId(exp),
                        preset == "paper" ? Preset::kPaper : Preset::kDesk);
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(is);
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config file: ") + e.what());
      }
      apply_json(cfg, j);
      cfg.exp_id = ParseExpId(exp);
    }
    if (rounds) cfg.T = *rounds;
    if (!agents.empty()) cfg.m = agents;
    if (dim) cfg.d = *dim;
    if (arms) cfg.K = *arms;
    if (!epsilons.empty()) cfg.epsilon = epsilons;
    if (delta) cfg.delta = *delta;
    if (alpha) cfg.alpha = *alpha;
    if (lambda) cfg.lambda = *lambda;
    if (sigma) cfg.sigma = *sigma;
    if (steepness) cfg.c_f = *steepness;
    if (b1_threshold) cfg.b1_threshold = *b1_threshold;
    if (protocol) cfg.protocol = ParseProtocol(*protocol);
    if (privacy) cfg.privacy = *privacy == "dp";
    if (num_seeds) {
      cfg.seeds.clear();
      for (int s = 1; s <= *num_seeds; ++s) cfg.seeds.push_back(s);
    }
    if (!seed_list.empty()) cfg.seeds = seed_list;
    if (norm) cfg.norm_mode = ParseNormMode(*norm);
    if (pgd_iters) cfg.pgd.max_iters = *pgd_iters;
    if (pgd_restarts) cfg.pgd.restarts = *pgd_restarts;
    cfg.write_round_logs = round_logs;
    cfg.output_dir = out_dir;
    if (cfg.exp_id != ExpId::kCustom && (protocol || privacy)) {
      throw ConfigError("--protocol and --privacy apply to --exp custom only");
    }
    validate(cfg);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    const ExperimentResult r = run_experiment(cfg, threads.value_or(default_threads()));
    print_summary(r, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace fairfed

#endif  // FAIRFED_CLI_HPP_
