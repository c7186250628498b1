#pragma once

#include <cstdint>
#include <random>

namespace relax {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); replicate k of a study uses stream k.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5EEDu};
  return Rng(seq);
}

}  // namespace relax
