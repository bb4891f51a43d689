#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "lemur/corpus.hpp"
#include "lemur/error.hpp"
#include "lemur/random.hpp"

namespace lemur {

// Desk-scale synthetic multi-vector data: each document draws a random
// Gaussian center and t ~ U[min_tokens, max_tokens] tokens scattered around
// it, optionally projected to the unit sphere like late-interaction
// embeddings.
struct SynthConfig {
  std::size_t docs = 1000;
  std::size_t dim = 32;
  std::size_t min_tokens = 8;
  std::size_t max_tokens = 32;
  double noise = 1.0;  // token spread relative to the center's scale
  bool normalize = true;
  std::uint64_t seed = 42;

  void validate() const {
    if (docs == 0 || dim == 0) throw ArgumentError("synthetic corpus needs docs >= 1 and dim >= 1");
    if (min_tokens == 0 || min_tokens > max_tokens) {
      throw ArgumentError("token range must satisfy 1 <= min_tokens <= max_tokens");
    }
    if (!(noise >= 0.0)) throw ArgumentError("noise must be >= 0");
  }
};

inline Corpus synth_corpus(const SynthConfig& cfg) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, SeedStream::kSynth);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::uniform_int_distribution<std::size_t> count(cfg.min_tokens, cfg.max_tokens);
  std::vector<std::uint64_t> offsets{0};
  std::vector<float> payload;
  std::vector<float> center(cfg.dim);
  for (std::size_t j = 0; j < cfg.docs; ++j) {
    for (float& c : center) c = normal(rng);
    const std::size_t t = count(rng);
    for (std::size_t i = 0; i < t; ++i) {
      const std::size_t row = payload.size();
      double norm2 = 0.0;
      for (std::size_t k = 0; k < cfg.dim; ++k) {
        const float v = center[k] + static_cast<float>(cfg.noise) * normal(rng);
        payload.push_back(v);
        norm2 += static_cast<double>(v) * v;
      }
      if (cfg.normalize && norm2 > 0.0) {
        const auto inv = static_cast<float>(1.0 / std::sqrt(norm2));
        for (std::size_t k = 0; k < cfg.dim; ++k) payload[row + k] *= inv;
      }
    }
    offsets.push_back(offsets.back() + t);
  }
  return Corpus(cfg.dim, std::move(offsets), std::move(payload));
}

}  // namespace lemur
