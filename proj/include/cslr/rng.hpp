/* Copyright 2026 The CSLR Toolkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace cslr {

// Deterministic counter-based generator (splitmix64 core). All stochastic
// code takes an Rng explicitly; given the same seed the stream is identical
// on every platform, which is what makes single-threaded runs bit-exact.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed), has_spare_(false) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1u;
    if (range == 0) return static_cast<std::int64_t>(next_u64());  // full span
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return lo + static_cast<std::int64_t>(x % range);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller; the spare value is cached so the
  // consumed stream stays deterministic.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Heavy-tailed draw (standard Cauchy scaled); used to model erratic
  // keypoint tracks in the synthetic generator.
  double cauchy(double scale) {
    double u = uniform();
    while (u == 0.5) u = uniform();
    return scale * std::tan(M_PI * (u - 0.5));
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_;
};

// Hash-combines a base seed with a list of tags (stage id, epoch, sample
// index, ...) so substreams are independent and reproducible.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = base;
  for (std::uint64_t t : tags) {
    s ^= t + 0x9e3779b97f4a7c15ull + (s << 6) + (s >> 2);
    Rng mix(s);
    s = mix.next_u64();
  }
  return s;
}

}  // namespace cslr
