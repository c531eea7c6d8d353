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

// Counter-based random streams. A stream is identified by a key derived from
// (master seed, purpose, coordinates...) and produces its n-th output as a
// pure function of (key, n), so draws never depend on execution order or on
// how many values some other stream consumed.

#ifndef FAIRFED_RNG_HPP_
#define FAIRFED_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace fairfed {

// Stream purposes. Values are part of the reproducibility contract; append
// only.
enum class Purpose : std::uint64_t {
  kTheta = 1,
  kContext = 2,
  kRewardNoise = 3,
  kAction = 4,
  kPgd = 5,
  kTreeNoise = 6,
  kTest = 7,
};

// SplitMix64 finalizer.
constexpr std::uint64_t Mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Stream {
 public:
  explicit Stream(std::uint64_t key) : key_(key) {}

  // Key derivation: folds each coordinate through the mixer so that
  // (a, b) and (b, a) land on unrelated keys.
  static Stream For(std::uint64_t seed, Purpose purpose,
                    std::initializer_list<std::uint64_t> coords = {}) {
    std::uint64_t k = Mix64(seed ^ 0x6a09e667f3bcc909ULL);
    k = Mix64(k ^ (static_cast<std::uint64_t>(purpose) * kGolden));
    for (std::uint64_t c : coords) k = Mix64(k + kGolden + Mix64(c + 1));
    return Stream(k);
  }

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

  std::uint64_t NextU64() { return Mix64(key_ + (++counter_) * kGolden); }

  // Uniform on [0, 1) with 53 random bits.
  double Uniform() {
    return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1].
  double UniformOpenZero() {
    return (static_cast<double>(NextU64() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the spare variate is cached.
  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = UniformOpenZero();
    const double u2 = Uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  double Normal(double mean, double stddev) {
    return mean + stddev * Normal();
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace fairfed

#endif  // FAIRFED_RNG_HPP_
