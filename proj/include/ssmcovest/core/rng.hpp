#pragma once

#include <cstdint>

namespace ssmcovest::core {

// Counter-based random stream. Output i is a SplitMix64 finalizer applied to
// key + i * gamma, where (key, gamma) are derived from (seed, stream_id).
// The sequence depends only on (seed, stream_id) and the number of draws
// consumed, so results are reproducible independent of platform or thread
// count. A stream is single-consumer; give each worker its own split().
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  // Standard normal (Box-Muller, second variate cached).
  double normal();

  // Independent child stream; depends only on this stream's (seed, stream_id)
  // and child, not on how many draws were consumed.
  RngStream split(std::uint64_t child) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t gamma_;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64_mix(std::uint64_t z);

}  // namespace ssmcovest::core
