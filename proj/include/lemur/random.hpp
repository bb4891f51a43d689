#pragma once

#include <cstdint>
#include <random>

namespace lemur {

using Rng = std::mt19937_64;

// Named sub-streams of one master seed. Each consumer draws from its own
// stream so adding a consumer never perturbs the others.
enum class SeedStream : std::uint32_t {
  kTokenSample = 1,
  kTargetDocs = 2,
  kInit = 3,
  kShuffle = 4,
  kOlsTokens = 5,
  kSynth = 6,
  kProbe = 7,
};

inline std::uint64_t derive_seed(std::uint64_t master, SeedStream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(master), static_cast<std::uint32_t>(master >> 32),
                    static_cast<std::uint32_t>(stream)};
  Rng rng(seq);
  return rng();
}

inline Rng make_rng(std::uint64_t master, SeedStream stream) { return Rng(derive_seed(master, stream)); }

}  // namespace lemur
