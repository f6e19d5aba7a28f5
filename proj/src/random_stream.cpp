// SPDX-License-Identifier: Apache-2.0
#include "conelab/random_stream.hpp"

namespace conelab {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t shard, std::uint64_t counter)
    : RandomStream(seed, shard, mix64(mix64(seed + kGolden) ^ mix64(shard * kGolden + 0x632BE59BD9B4E019ULL)),
                   counter) {}

RandomStream::RandomStream(std::uint64_t seed, std::uint64_t shard, std::uint64_t key, std::uint64_t counter)
    : seed_(seed), shard_(shard), key_(key), counter_(counter) {}

std::uint64_t RandomStream::next_u64() {
  const std::uint64_t z = key_ + (++counter_) * kGolden;
  return mix64(mix64(z) ^ key_);
}

RandomStream RandomStream::split(std::uint64_t child) const {
  const std::uint64_t key = mix64(key_ ^ mix64(child * kGolden + 0xD1B54A32D192ED03ULL));
  return RandomStream(seed_, child, key, 0);
}

}  // namespace conelab
