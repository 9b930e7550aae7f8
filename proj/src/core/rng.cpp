#include "ssmcovest/core/rng.hpp"

#include <cmath>
#include <numbers>

namespace ssmcovest::core {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t splitmix64_mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id) {
  key_ = splitmix64_mix(seed ^ splitmix64_mix(stream_id + kGolden));
  gamma_ = splitmix64_mix(key_ + kGolden * 3) | 1ULL;
}

std::uint64_t RngStream::next_u64() {
  ++counter_;
  return splitmix64_mix(key_ + counter_ * gamma_);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  // 1 - uniform() lies in (0, 1], so the log is finite.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_normal_ = radius * std::sin(angle);
  has_cached_normal_ = true;
  return radius * std::cos(angle);
}

RngStream RngStream::split(std::uint64_t child) const {
  const std::uint64_t child_seed = splitmix64_mix(key_ ^ splitmix64_mix(child * kGolden + gamma_));
  return RngStream(child_seed, child);
}

}  // namespace ssmcovest::core
