// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace conelab {

// Counter-based stream: output k is a keyed hash of (seed, shard, k).
// Streams with different (seed, shard) pairs are independent for practical purposes,
// and a stream can be replayed from any counter position.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t shard = 0, std::uint64_t counter = 0);

  std::uint64_t next_u64();
  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }
  // Child stream keyed by this stream's key and `child`.
  RandomStream split(std::uint64_t child) const;

  std::uint64_t seed() const { return seed_; }
  std::uint64_t shard() const { return shard_; }
  std::uint64_t counter() const { return counter_; }

 private:
  RandomStream(std::uint64_t seed, std::uint64_t shard, std::uint64_t key, std::uint64_t counter);

  std::uint64_t seed_;
  std::uint64_t shard_;
  std::uint64_t key_;
  std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace conelab
