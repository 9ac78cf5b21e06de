#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace hcrl {

using Engine = std::mt19937_64;

/// Labeled, independent random streams derived from one run seed.
///
/// Every engine is a pure function of (seed, label, keys), so drawing more
/// samples from one stream (say "cem") never shifts another ("env",
/// "train"), and a run restarted at a task boundary needs only the seed.
class RngStreams {
 public:
  explicit RngStreams(std::uint64_t seed = 0) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  Engine engine(std::string_view label, std::uint64_t k0 = 0, std::uint64_t k1 = 0,
                std::uint64_t k2 = 0) const;

 private:
  std::uint64_t seed_;
};

}  // namespace hcrl
