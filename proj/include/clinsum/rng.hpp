//
// Copyright 2026 The Clinsum Authors
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

// Reproducible random streams.
//
// One global seed fans out to independent substreams keyed by
// (module name, record key):
//
//   s0 = splitmix64(seed)
//   s1 = splitmix64(s0 ^ fnv1a64(module))
//   s2 = splitmix64(s1 ^ fnv1a64(key))
//
// and s2 seeds a std::mt19937_64, whose output sequence is fixed by the C++
// standard. Uniform doubles take the top 53 bits, so draws are bit-identical
// across standard libraries, worker counts and processing order.

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace clinsum {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view module,
                                 std::string_view key) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ fnv1a64(module));
  return splitmix64(s ^ fnv1a64(key));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng for_record(std::uint64_t seed, std::string_view module,
                        std::string_view key) {
    return Rng(derive_seed(seed, module, key));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) {
    // Rejection sampling keeps the result unbiased and portable.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace clinsum
