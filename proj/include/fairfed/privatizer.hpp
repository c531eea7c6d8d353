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

// Tree-based release of an agent's cumulative statistics under continual
// observation.
//
// Each synchronization inserts the agent's increment [S | s] (a d x (d+1)
// matrix) as the next leaf of a complete binary tree whose nodes carry
// Gaussian noise fixed at construction. The release after k insertions is
// the exact prefix sum plus the noise of the canonical dyadic cover of
// [1, k], which has popcount(k) <= 1 + ceil(log2 k) nodes. The Gram block is
// then shifted by 2 * Lambda * I so that, with high probability, the noise
// plus shift has its spectrum inside [Lambda, 3 Lambda].

#ifndef FAIRFED_PRIVATIZER_HPP_
#define FAIRFED_PRIVATIZER_HPP_

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "fairfed/errors.hpp"
#include "fairfed/numkit.hpp"
#include "fairfed/rng.hpp"
#include "json.hpp"

namespace fairfed {

struct NodePrivacy {
  double epsilon;
  double delta;
};

// Budget of one tree node: (eps / sqrt(8 m ln(2/delta)), delta / (2m)).
inline NodePrivacy per_node_privacy(double epsilon, double delta, int m) {
  if (!(epsilon > 0.0) || !(delta > 0.0) || !(delta < 1.0) || m < 1) {
    throw ConfigError("per_node_privacy: need eps > 0, 0 < delta < 1, m >= 1");
  }
  return {epsilon / std::sqrt(8.0 * m * std::log(2.0 / delta)),
          delta / (2.0 * m)};
}

// Depth of a binary tree with room for `num_releases` leaves:
// 1 + ceil(log2 num_releases).
inline int tree_depth(std::int64_t num_releases) {
  if (num_releases < 1) throw ConfigError("tree_depth: need >= 1 release");
  return 1 + static_cast<int>(std::bit_width(
                 static_cast<std::uint64_t>(num_releases - 1)));
}

struct PrivacyParams {
  double epsilon = 2.0;
  double delta = 0.1;
  int m = 1;
  int d = 1;
  double context_norm = 1.0;  // L_x
  std::int64_t num_releases = 1;  // planned synchronizations (tree leaves)
  int depth = 1;
  double per_node_eps = 0.0;
  double per_node_delta = 0.0;
  double noise_sigma2 = 0.0;  // per-entry variance of raw node noise
  // Accuracy triple and the PSD shift magnitude.
  double shift = 0.0;  // Lambda; releases are shifted by 2 * Lambda
  double rho_bar = 0.0;
  double rho_underbar = 0.0;
  double z = 0.0;
  double alpha = 0.1;

  double sigma_node() const { return std::sqrt(noise_sigma2); }
};

struct AccuracyTriple {
  double shift;  // Lambda
  double rho_bar;
  double rho_underbar;
  double z;
};

// Gaussian-matrix concentration bounds on the accumulated tree noise, at
// failure probability alpha / (2 n_syncs m) per release:
//   Lambda = sqrt(2n) s (4 sqrt(d) + 2 ln(2 n_syncs m / alpha))
//   z      = sqrt(2n) s (sqrt(d)   + 2 ln(2 n_syncs m / alpha))
// with s the node noise std. (rho_underbar, rho_bar) = (Lambda, 3 Lambda),
// floored at the ridge so the private radius stays defined without noise.
inline AccuracyTriple accuracy_triple(const PrivacyParams& p,
                                      std::int64_t n_syncs, double alpha,
                                      double ridge_floor) {
  if (n_syncs < 1 || !(alpha > 0.0) || !(alpha < 1.0)) {
    throw ConfigError("accuracy_triple: need n_syncs >= 1, 0 < alpha < 1");
  }
  const double log_term = 2.0 * std::log(2.0 * double(n_syncs) * p.m / alpha);
  const double scale = std::sqrt(2.0 * p.depth) * p.sigma_node();
  const double lambda_shift = scale * (4.0 * std::sqrt(double(p.d)) + log_term);
  AccuracyTriple out;
  out.shift = lambda_shift;
  out.z = scale * (std::sqrt(double(p.d)) + log_term);
  out.rho_underbar = std::max(lambda_shift, ridge_floor);
  out.rho_bar = std::max(3.0 * lambda_shift, ridge_floor);
  return out;
}

// Full calibration: per-node split, tree depth, node noise variance
//   16 n (L^2 + 1)^2 ln(2/delta_node)^2 / eps_node^2
// and the accuracy triple.
inline PrivacyParams calibrate(double epsilon, double delta, int m, int d,
                               double context_norm, std::int64_t num_releases,
                               double alpha, double ridge_floor) {
  PrivacyParams p;
  p.epsilon = epsilon;
  p.delta = delta;
  p.m = m;
  p.d = d;
  p.context_norm = context_norm;
  p.num_releases = num_releases;
  p.alpha = alpha;
  p.depth = tree_depth(num_releases);
  const NodePrivacy node = per_node_privacy(epsilon, delta, m);
  p.per_node_eps = node.epsilon;
  p.per_node_delta = node.delta;
  const double l2p1 = context_norm * context_norm + 1.0;
  const double lg = std::log(2.0 / node.delta);
  p.noise_sigma2 = 16.0 * p.depth * l2p1 * l2p1 * lg * lg /
                   (node.epsilon * node.epsilon);
  const AccuracyTriple acc = accuracy_triple(p, num_releases, alpha, ridge_floor);
  p.shift = acc.shift;
  p.rho_bar = acc.rho_bar;
  p.rho_underbar = acc.rho_underbar;
  p.z = acc.z;
  return p;
}

// Calibration with every noise source switched off; releases are exact.
inline PrivacyParams zero_noise_params(int m, int d, std::int64_t num_releases,
                                       double ridge_floor) {
  PrivacyParams p;
  p.m = m;
  p.d = d;
  p.num_releases = num_releases;
  p.depth = tree_depth(num_releases);
  p.rho_bar = ridge_floor;
  p.rho_underbar = ridge_floor;
  return p;
}

inline nlohmann::json to_json(const PrivacyParams& p) {
  return {{"epsilon", p.epsilon},
          {"delta", p.delta},
          {"per_node_eps", p.per_node_eps},
          {"per_node_delta", p.per_node_delta},
          {"noise_sigma2", p.noise_sigma2},
          {"n", p.depth},
          {"num_releases", p.num_releases},
          {"Lambda", p.shift},
          {"release_shift", 2.0 * p.shift},
          {"rho_bar", p.rho_bar},
          {"rho_underbar", p.rho_underbar},
          {"z", p.z},
          {"alpha", p.alpha},
          {"context_norm", p.context_norm},
          {"log_base", {{"tree_depth", "2"}, {"noise_variance", "e"},
                        {"accuracy_triple", "e"}}},
          {"noise_reward_column", "unsymmetrized"}};
}

// One node's noise: iid N(0, sigma2) entries, with the leading d x d block
// replaced by (N + N^T) / sqrt(2). The reward column is left as drawn.
inline Eigen::MatrixXd sample_node_noise(int d, double sigma2, Stream& rng) {
  Eigen::MatrixXd n = Eigen::MatrixXd::Zero(d, d + 1);
  if (sigma2 == 0.0) return n;
  const double sd = std::sqrt(sigma2);
  for (int j = 0; j < d + 1; ++j) {
    for (int i = 0; i < d; ++i) n(i, j) = sd * rng.Normal();
  }
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j <= i; ++j) {
      const double v = (n(i, j) + n(j, i)) / std::numbers::sqrt2;
      n(i, j) = v;
      n(j, i) = v;
    }
  }
  return n;
}

class NoiseTree {
 public:
  struct Release {
    Eigen::MatrixXd value;  // prefix sum + noise, d x (d+1)
    int nodes_used = 0;
  };

  // Tree of the given depth with 2^(depth-1) leaves. Node noise is drawn
  // level by level from `rng`.
  NoiseTree(int d, int depth, double noise_sigma2, Stream rng)
      : d_(d), depth_(depth) {
    if (d < 1 || depth < 1 || depth > 40) {
      throw ConfigError("NoiseTree: invalid dimension or depth");
    }
    levels_.resize(depth);
    for (int l = 0; l < depth; ++l) {
      const std::int64_t count = std::int64_t{1} << (depth - 1 - l);
      levels_[l].reserve(count);
      for (std::int64_t j = 0; j < count; ++j) {
        levels_[l].push_back(Node{Eigen::MatrixXd::Zero(d, d + 1),
                                  sample_node_noise(d, noise_sigma2, rng)});
      }
    }
    prefixes_.push_back(Eigen::MatrixXd::Zero(d, d + 1));
  }

  int dim() const { return d_; }
  int depth() const { return depth_; }
  std::int64_t leaf_count() const { return std::int64_t{1} << (depth_ - 1); }
  std::int64_t size() const { return std::int64_t(prefixes_.size()) - 1; }

  // Places `m` at the next free leaf and refreshes the partial sums on its
  // root path (each parent recomputed as left + right).
  void Insert(const Eigen::MatrixXd& m) {
    if (m.rows() != d_ || m.cols() != d_ + 1) {
      throw InvariantError("NoiseTree::Insert: expected d x (d+1) matrix");
    }
    const std::int64_t leaf = size();
    if (leaf >= leaf_count()) {
      throw CapacityError("NoiseTree::Insert: tree full (" +
                          std::to_string(leaf_count()) + " leaves)");
    }
    levels_[0][leaf].data = m;
    std::int64_t idx = leaf;
    for (int l = 1; l < depth_; ++l) {
      idx >>= 1;
      levels_[l][idx].data =
          levels_[l - 1][2 * idx].data + levels_[l - 1][2 * idx + 1].data;
    }
    prefixes_.push_back(prefixes_.back() + m);
  }

  // Sum of the first k inserts plus the noise of the canonical dyadic
  // cover of [1, k].
  Release NoisyPrefix(std::int64_t k) const {
    Release out = PrefixNoise(k);
    out.value += prefixes_[k];
    return out;
  }

  // Noise of the canonical dyadic cover of [1, k] alone.
  Release PrefixNoise(std::int64_t k) const {
    CheckPrefix(k);
    Release out;
    out.value = CoverNoise(k, &out.nodes_used);
    return out;
  }

  // Sum of data_sum over the canonical cover (no noise). Equal to the flat
  // prefix up to floating-point association.
  Eigen::MatrixXd DyadicDataSum(std::int64_t k) const {
    CheckPrefix(k);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d_, d_ + 1);
    ForEachCoverNode(k, [&](const Node& n) { acc += n.data; });
    return acc;
  }

  // Checks the parent = left + right invariant on every internal node and
  // symmetry of every node's noise block.
  bool CheckInvariants() const {
    for (int l = 1; l < depth_; ++l) {
      for (std::size_t j = 0; j < levels_[l].size(); ++j) {
        const Eigen::MatrixXd sum =
            levels_[l - 1][2 * j].data + levels_[l - 1][2 * j + 1].data;
        if (sum != levels_[l][j].data) return false;
      }
    }
    for (const auto& level : levels_) {
      for (const Node& n : level) {
        const auto block = n.noise.leftCols(d_);
        if (block != block.transpose()) return false;
      }
    }
    return true;
  }

  const Eigen::MatrixXd& NodeData(int level, std::int64_t index) const {
    return levels_.at(level).at(index).data;
  }
  const Eigen::MatrixXd& NodeNoise(int level, std::int64_t index) const {
    return levels_.at(level).at(index).noise;
  }

 private:
  struct Node {
    Eigen::MatrixXd data;
    Eigen::MatrixXd noise;
  };

  void CheckPrefix(std::int64_t k) const {
    if (k < 1 || k > size()) {
      throw RangeError("NoiseTree: prefix " + std::to_string(k) +
                       " outside [1, " + std::to_string(size()) + "]");
    }
  }

  template <typename Fn>
  void ForEachCoverNode(std::int64_t k, Fn&& fn) const {
    std::int64_t pos = 0;
    for (int l = depth_ - 1; l >= 0; --l) {
      const std::int64_t width = std::int64_t{1} << l;
      if (k & width) {
        fn(levels_[l][pos >> l]);
        pos += width;
      }
    }
  }

  Eigen::MatrixXd CoverNoise(std::int64_t k, int* nodes_used) const {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d_, d_ + 1);
    int used = 0;
    ForEachCoverNode(k, [&](const Node& n) {
      acc += n.noise;
      ++used;
    });
    *nodes_used = used;
    return acc;
  }

  int d_;
  int depth_;
  std::vector<std::vector<Node>> levels_;
  std::vector<Eigen::MatrixXd> prefixes_;
};

struct PrivateRelease {
  SymMat gram;  // U_hat
  Vec reward;   // u_hat
  int nodes_used = 0;
};

// Inserts the increment [S | s] since the previous release, then releases
// the agent's cumulative statistics plus the cover noise of all releases so
// far, with the 2 * Lambda PSD shift on the Gram block. The cumulative
// statistics are the running sum of the inserted increments; passing them
// in keeps a noiseless release bit-identical to the exact sums.
inline PrivateRelease privatize(const SymMat& cumulative_gram,
                                const Vec& cumulative_reward,
                                const SymMat& increment_gram,
                                const Vec& increment_reward, NoiseTree& tree,
                                const PrivacyParams& params) {
  const int d = tree.dim();
  if (increment_gram.dim() != d || increment_reward.size() != d ||
      cumulative_gram.dim() != d || cumulative_reward.size() != d) {
    throw InvariantError("privatize: dimension mismatch");
  }
  Eigen::MatrixXd flat(d, d + 1);
  flat.leftCols(d) = increment_gram.matrix();
  flat.col(d) = increment_reward;
  tree.Insert(flat);
  const NoiseTree::Release noise = tree.PrefixNoise(tree.size());
  PrivateRelease out;
  out.gram = cumulative_gram + SymMat(Eigen::MatrixXd(noise.value.leftCols(d)));
  out.gram.AddToDiagonal(2.0 * params.shift);
  out.reward = cumulative_reward + noise.value.col(d);
  out.nodes_used = noise.nodes_used;
  if (params.noise_sigma2 > 0.0) {
    const double lo = min_eig(out.gram);
    if (lo < -kPsdTolerance) {
      throw InvariantError("privatize: release indefinite after shift (min "
                           "eigenvalue " + std::to_string(lo) + ")");
    }
  }
  return out;
}

}  // namespace fairfed

#endif  // FAIRFED_PRIVATIZER_HPP_
