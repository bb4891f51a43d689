#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lemur/binary_io.hpp"
#include "lemur/error.hpp"
#include "lemur/random.hpp"
#include "lemur/tokens.hpp"

namespace lemur {

inline constexpr std::array<char, 8> kCorpusMagic = {'M', 'V', 'E', 'C', '0', '0', '0', '1'};
inline constexpr std::uint32_t kCorpusVersion = 1;

enum class DType : std::uint32_t { kFloat32 = 0 };

// An immutable collection of multi-vector documents stored as one flat
// token payload plus cumulative offsets. Document j owns token rows
// [offsets[j], offsets[j+1]). The same container holds query sets and
// training-token sources.
class Corpus {
 public:
  Corpus() = default;

  Corpus(std::size_t dim, std::vector<std::uint64_t> offsets, std::vector<float> payload)
      : dim_(dim), offsets_(std::move(offsets)), payload_(std::move(payload)) {
    validate();
  }

  static Corpus from_docs(std::span<const TokenMatrix> docs) {
    if (docs.empty()) throw EmptyCorpusError("corpus has no documents");
    const std::size_t dim = docs.front().dim();
    std::vector<std::uint64_t> offsets{0};
    std::vector<float> payload;
    for (std::size_t j = 0; j < docs.size(); ++j) {
      if (docs[j].dim() != dim) {
        throw ArgumentError("document " + std::to_string(j) + " has dim " + std::to_string(docs[j].dim()) +
                            ", corpus dim is " + std::to_string(dim));
      }
      payload.insert(payload.end(), docs[j].data().begin(), docs[j].data().end());
      offsets.push_back(offsets.back() + docs[j].tokens());
    }
    return Corpus(dim, std::move(offsets), std::move(payload));
  }

  std::size_t size() const { return offsets_.empty() ? 0 : offsets_.size() - 1; }
  std::size_t dim() const { return dim_; }
  std::size_t total_tokens() const { return offsets_.empty() ? 0 : offsets_.back(); }

  TokenView doc(std::size_t j) const {
    const auto begin = offsets_[j] * dim_;
    const auto end = offsets_[j + 1] * dim_;
    return TokenView(std::span(payload_).subspan(begin, end - begin), dim_);
  }

  TokenMatrix doc_copy(std::size_t j) const {
    auto v = doc(j).data();
    return TokenMatrix(std::vector<float>(v.begin(), v.end()), dim_);
  }

  // Row i of the pooled token union, in storage order.
  std::span<const float> token(std::size_t i) const { return std::span(payload_).subspan(i * dim_, dim_); }

  // Token rows of documents [first, last) as one contiguous view.
  TokenView doc_range(std::size_t first, std::size_t last) const {
    const auto begin = offsets_[first] * dim_;
    const auto end = offsets_[last] * dim_;
    return TokenView(std::span(payload_).subspan(begin, end - begin), dim_);
  }

  const std::vector<std::uint64_t>& offsets() const { return offsets_; }
  const std::vector<float>& payload() const { return payload_; }

  bool operator==(const Corpus&) const = default;

 private:
  void validate() const {
    if (dim_ == 0) throw EmptyCorpusError("corpus dimension is 0");
    if (offsets_.size() < 2) throw EmptyCorpusError("corpus has no documents");
    if (offsets_.front() != 0) throw CorruptionError("first offset must be 0");
    for (std::size_t j = 0; j + 1 < offsets_.size(); ++j) {
      if (offsets_[j + 1] <= offsets_[j]) {
        throw CorruptionError("offsets must be strictly increasing (document " + std::to_string(j) +
                              " has no tokens)");
      }
    }
    if (payload_.size() != offsets_.back() * dim_) {
      throw CorruptionError("payload holds " + std::to_string(payload_.size()) + " floats, offsets imply " +
                            std::to_string(offsets_.back() * dim_));
    }
    if (!all_finite(payload_)) throw CorruptionError("payload contains non-finite values");
  }

  std::size_t dim_ = 0;
  std::vector<std::uint64_t> offsets_;
  std::vector<float> payload_;
};

inline void write_corpus(const Corpus& corpus, const std::string& path) {
  if (corpus.size() == 0) throw EmptyCorpusError("refusing to write empty corpus to '" + path + "'");
  io::Writer out(path);
  out.bytes(kCorpusMagic.data(), kCorpusMagic.size());
  out.put<std::uint32_t>(kCorpusVersion);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(corpus.dim()));
  out.put<std::uint64_t>(corpus.size());
  out.put<std::uint32_t>(static_cast<std::uint32_t>(DType::kFloat32));
  out.put_array(std::span<const std::uint64_t>(corpus.offsets()));
  out.put_array(std::span<const float>(corpus.payload()));
  out.close();
}

inline Corpus read_corpus(const std::string& path) {
  io::Reader in(path);
  std::array<char, 8> magic{};
  in.bytes(magic.data(), magic.size(), "magic");
  if (magic != kCorpusMagic) throw FormatError("'" + path + "' is not an embedding file (bad magic)");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kCorpusVersion) {
    throw FormatError("'" + path + "' has unsupported version " + std::to_string(version));
  }
  const auto dim = in.get<std::uint32_t>("dim");
  const auto count = in.get<std::uint64_t>("count");
  const auto dtype = in.get<std::uint32_t>("dtype");
  if (dtype != static_cast<std::uint32_t>(DType::kFloat32)) {
    throw FormatError("'" + path + "' has unsupported dtype " + std::to_string(dtype));
  }
  if (dim == 0 || count == 0) throw EmptyCorpusError("'" + path + "' holds an empty corpus");
  if ((count + 1) * sizeof(std::uint64_t) > in.remaining()) {
    throw CorruptionError("'" + path + "' is truncated inside the offset table");
  }
  std::vector<std::uint64_t> offsets(count + 1);
  in.get_array(std::span(offsets), "offsets");
  if (offsets.back() * dim * sizeof(float) != in.remaining()) {
    throw CorruptionError("'" + path + "' payload is " + std::to_string(in.remaining()) + " bytes, header implies " +
                          std::to_string(offsets.back() * dim * sizeof(float)));
  }
  std::vector<float> payload(offsets.back() * dim);
  in.get_array(std::span(payload), "payload");
  try {
    return Corpus(dim, std::move(offsets), std::move(payload));
  } catch (const Error& e) {
    throw CorruptionError("'" + path + "': " + e.what());
  }
}

// n token embeddings drawn uniformly from the pooled union of all tokens in
// `source`: without replacement when n <= total_tokens, with replacement
// otherwise. Row-major (n x dim).
inline TokenMatrix sample_training_tokens(const Corpus& source, std::size_t n, std::uint64_t seed) {
  if (source.total_tokens() == 0) throw EmptyCorpusError("cannot sample tokens from an empty corpus");
  if (n == 0) throw ArgumentError("token sample size must be >= 1");
  Rng rng = make_rng(seed, SeedStream::kTokenSample);
  const std::size_t total = source.total_tokens();
  std::vector<std::size_t> picks;
  picks.reserve(n);
  if (n <= total) {
    std::vector<std::size_t> all(total);
    std::iota(all.begin(), all.end(), std::size_t{0});
    std::sample(all.begin(), all.end(), std::back_inserter(picks), n, rng);
    std::shuffle(picks.begin(), picks.end(), rng);
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, total - 1);
    for (std::size_t i = 0; i < n; ++i) picks.push_back(pick(rng));
  }
  TokenMatrix out(n, source.dim());
  for (std::size_t i = 0; i < n; ++i) {
    auto src = source.token(picks[i]);
    std::copy(src.begin(), src.end(), out.token(i).begin());
  }
  return out;
}

// m_prime distinct document ids, uniform without replacement, ascending.
inline std::vector<DocId> sample_target_docs(const Corpus& corpus, std::size_t m_prime, std::uint64_t seed) {
  if (m_prime == 0 || m_prime > corpus.size()) {
    throw ArgumentError("m_prime=" + std::to_string(m_prime) + " must lie in [1, " + std::to_string(corpus.size()) +
                        "]");
  }
  Rng rng = make_rng(seed, SeedStream::kTargetDocs);
  std::vector<DocId> all(corpus.size());
  std::iota(all.begin(), all.end(), DocId{0});
  std::vector<DocId> picks;
  picks.reserve(m_prime);
  std::sample(all.begin(), all.end(), std::back_inserter(picks), m_prime, rng);
  return picks;
}

}  // namespace lemur
