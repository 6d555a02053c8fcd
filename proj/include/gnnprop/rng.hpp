// Copyright 2026 The gnnprop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Counter-based random numbers.
//
// All randomness in gnnprop comes from Philox4x32-10 (Salmon et al., "Parallel
// random numbers: as easy as 1, 2, 3", SC'11). A generator is identified by a
// 64-bit seed (the Philox key) and a 64-bit stream id (the upper half of the
// counter); the lower half of the counter walks through the stream. Streams
// are derived from a master seed by purpose and index, so no two consumers
// ever share a sequence and no global RNG state exists:
//
//   stream_id = (purpose << 56) | (index & 0x00ff'ffff'ffff'ffff)
//
// Uniform and normal deviates are derived here rather than through <random>
// distributions, so sequences do not depend on the standard library.

#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace gnnprop {

enum class StreamPurpose : std::uint64_t {
  kGraph = 1,
  kFeatures = 2,
  kSplit = 3,
  kWeights = 4,
  kSampling = 5,
  kTraining = 6,
};

class Philox4x32 {
 public:
  using result_type = std::uint64_t;

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  result_type operator()() {
    if (lane_ == 2) {
      refill();
    }
    const std::uint64_t lo = block_[2 * lane_];
    const std::uint64_t hi = block_[2 * lane_ + 1];
    ++lane_;
    return (hi << 32) | lo;
  }

  // Raw block function, exposed for known-answer tests.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> ctr,
                                            std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
             static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
             static_cast<std::uint32_t>(p0)};
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }

 private:
  void refill() {
    block_ = block({static_cast<std::uint32_t>(counter_),
                    static_cast<std::uint32_t>(counter_ >> 32),
                    static_cast<std::uint32_t>(stream_),
                    static_cast<std::uint32_t>(stream_ >> 32)},
                   key_);
    ++counter_;
    lane_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int lane_ = 2;
};

inline std::uint64_t stream_id(StreamPurpose purpose, std::uint64_t index) {
  return (static_cast<std::uint64_t>(purpose) << 56) |
         (index & 0x00ff'ffff'ffff'ffffULL);
}

inline Philox4x32 make_stream(std::uint64_t seed, StreamPurpose purpose,
                              std::uint64_t index = 0) {
  return Philox4x32(seed, stream_id(purpose, index));
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Philox4x32& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via the cosine branch of Box-Muller. No deviate is cached
// between calls.
inline double standard_normal(Philox4x32& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) {
    u1 = uniform01(rng);
  }
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) *
         std::cos(6.283185307179586476925286766559 * u2);
}

// Uniform integer in [0, n) by 128-bit multiply-shift (Lemire, without the
// rejection step; the bias is below 2^-40 for the n used here).
inline std::uint64_t uniform_index(Philox4x32& rng, std::uint64_t n) {
  return static_cast<std::uint64_t>(
      (static_cast<unsigned __int128>(rng()) * n) >> 64);
}

// Hash of a 64-bit value (splitmix64 finalizer); used to derive child seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seed of the index-th child of `master` within the family `tag`; used to give
// every ensemble member or training run its own independent generator key.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                 std::uint64_t index) {
  return mix64(mix64(master ^ mix64(tag)) + index);
}

}  // namespace gnnprop
