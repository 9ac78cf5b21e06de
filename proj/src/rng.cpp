#include "hcrl/rng.hpp"

#include <array>

#include <zlib.h>

namespace hcrl {

Engine RngStreams::engine(std::string_view label, std::uint64_t k0, std::uint64_t k1,
                          std::uint64_t k2) const {
  const auto tag = crc32(0L, reinterpret_cast<const Bytef*>(label.data()),
                         static_cast<uInt>(label.size()));
  const std::array<std::uint32_t, 9> words{
      static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
      static_cast<std::uint32_t>(tag),   static_cast<std::uint32_t>(k0),
      static_cast<std::uint32_t>(k0 >> 32), static_cast<std::uint32_t>(k1),
      static_cast<std::uint32_t>(k1 >> 32), static_cast<std::uint32_t>(k2),
      static_cast<std::uint32_t>(k2 >> 32)};
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

}  // namespace hcrl
