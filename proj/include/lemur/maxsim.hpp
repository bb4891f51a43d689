#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "lemur/binary_io.hpp"
#include "lemur/corpus.hpp"
#include "lemur/error.hpp"
#include "lemur/parallel.hpp"
#include "lemur/tokens.hpp"

namespace lemur {

struct ScoredDoc {
  DocId doc_id = 0;
  float score = 0.0f;

  bool operator==(const ScoredDoc&) const = default;
};

// Total order used for every ranking: score descending, then doc_id ascending.
inline bool ranks_before(const ScoredDoc& a, const ScoredDoc& b) {
  return a.score > b.score || (a.score == b.score && a.doc_id < b.doc_id);
}

// Keeps the best min(k, size) entries of `scored`, sorted by ranks_before.
inline void keep_top_k(std::vector<ScoredDoc>& scored, std::size_t k) {
  k = std::min(k, scored.size());
  if (k < scored.size()) {
    std::nth_element(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(), ranks_before);
    scored.resize(k);
  }
  std::sort(scored.begin(), scored.end(), ranks_before);
}

namespace detail {
inline constexpr std::size_t kDocTokenBlock = 64;

inline void check_dims(std::size_t a, std::size_t b) {
  if (a != b) {
    throw ArgumentError("dimension mismatch: query dim " + std::to_string(a) + " vs document dim " + std::to_string(b));
  }
}
}  // namespace detail

// Sum over query tokens of the best inner product against the document's
// tokens. Document tokens are consumed in blocks with one running max per
// query token; the final sum runs over query tokens in index order.
template <class Acc = float>
Acc maxsim(TokenView query, TokenView doc) {
  detail::check_dims(query.dim(), doc.dim());
  const std::size_t dim = query.dim();
  const std::size_t nq = query.tokens();
  const std::size_t nd = doc.tokens();
  if (nq == 0) return Acc{0};
  if (nd == 0) throw ArgumentError("document has no tokens");

  std::vector<Acc> best(nq, -std::numeric_limits<Acc>::infinity());
  const float* q = query.data().data();
  const float* c = doc.data().data();
  for (std::size_t block = 0; block < nd; block += detail::kDocTokenBlock) {
    const std::size_t block_end = std::min(nd, block + detail::kDocTokenBlock);
    for (std::size_t i = 0; i < nq; ++i) {
      Acc m = best[i];
      for (std::size_t j = block; j < block_end; ++j) m = std::max(m, dot<Acc>(q + i * dim, c + j * dim, dim));
      best[i] = m;
    }
  }
  Acc total{0};
  for (Acc v : best) total += v;
  return total;
}

// g_l(x) = max over tokens c of document l of <c, x>, for each l in doc_ids.
template <class Acc = float>
std::vector<Acc> per_token_targets(std::span<const float> x, const Corpus& corpus, std::span<const DocId> doc_ids) {
  detail::check_dims(x.size(), corpus.dim());
  std::vector<Acc> out;
  out.reserve(doc_ids.size());
  for (DocId id : doc_ids) {
    if (id >= corpus.size()) {
      throw ArgumentError("doc id " + std::to_string(id) + " out of range [0, " + std::to_string(corpus.size()) + ")");
    }
    const TokenView doc = corpus.doc(id);
    Acc m = -std::numeric_limits<Acc>::infinity();
    for (std::size_t t = 0; t < doc.tokens(); ++t) m = std::max(m, dot<Acc>(x, doc.token(t)));
    out.push_back(m);
  }
  return out;
}

// Exact top-k lists for a batch of queries.
struct GroundTruth {
  std::size_t k = 0;  // list length, min(requested k, m)
  std::vector<std::vector<ScoredDoc>> lists;

  std::size_t query_count() const { return lists.size(); }
  bool operator==(const GroundTruth&) const = default;
};

// Exact MaxSim scores of one query against every document.
inline std::vector<ScoredDoc> score_all(TokenView query, const Corpus& corpus) {
  std::vector<ScoredDoc> scored(corpus.size());
  for (std::size_t j = 0; j < corpus.size(); ++j) {
    scored[j] = {static_cast<DocId>(j), maxsim<float>(query, corpus.doc(j))};
  }
  return scored;
}

inline GroundTruth brute_force_topk(const Corpus& queries, const Corpus& corpus, std::size_t k,
                                    std::size_t threads = 1) {
  if (k == 0) throw ArgumentError("k must be >= 1");
  detail::check_dims(queries.dim(), corpus.dim());
  GroundTruth truth;
  truth.k = std::min(k, corpus.size());
  truth.lists.resize(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t qi) {
    auto scored = score_all(queries.doc(qi), corpus);
    keep_top_k(scored, truth.k);
    truth.lists[qi] = std::move(scored);
  });
  return truth;
}

// |approx ∩ truth| / k with |approx| == |truth| == k.
inline double recall(std::span<const DocId> approx, std::span<const DocId> truth) {
  if (approx.size() != truth.size()) {
    throw ArgumentError("recall needs equal-size sets, got " + std::to_string(approx.size()) + " and " +
                        std::to_string(truth.size()));
  }
  if (truth.empty()) throw ArgumentError("recall of empty sets is undefined");
  const std::unordered_set<DocId> wanted(truth.begin(), truth.end());
  std::size_t hits = 0;
  for (DocId id : approx) hits += wanted.count(id);
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// Fraction of `truth` found anywhere in `candidates` (Recall k@k').
inline double candidate_recall(std::span<const DocId> candidates, std::span<const DocId> truth) {
  if (truth.empty()) throw ArgumentError("recall of empty truth set is undefined");
  const std::unordered_set<DocId> pool(candidates.begin(), candidates.end());
  std::size_t hits = 0;
  for (DocId id : truth) hits += pool.count(id);
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

inline std::vector<DocId> ids_of(std::span<const ScoredDoc> list) {
  std::vector<DocId> ids;
  ids.reserve(list.size());
  for (const auto& s : list) ids.push_back(s.doc_id);
  return ids;
}

// Layout: u32 k, u64 query_count, then per query k x (u64 doc_id, f32 score).
inline void write_ground_truth(const GroundTruth& truth, const std::string& path) {
  io::Writer out(path);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(truth.k));
  out.put<std::uint64_t>(truth.lists.size());
  for (std::size_t q = 0; q < truth.lists.size(); ++q) {
    const auto& list = truth.lists[q];
    if (list.size() != truth.k) {
      throw ArgumentError("query " + std::to_string(q) + " has " + std::to_string(list.size()) +
                          " results, expected " + std::to_string(truth.k));
    }
    for (const auto& s : list) {
      out.put<std::uint64_t>(s.doc_id);
      out.put<float>(s.score);
    }
  }
  out.close();
}

inline GroundTruth read_ground_truth(const std::string& path) {
  io::Reader in(path);
  GroundTruth truth;
  truth.k = in.get<std::uint32_t>("k");
  const auto count = in.get<std::uint64_t>("query_count");
  constexpr std::uint64_t kEntryBytes = sizeof(std::uint64_t) + sizeof(float);
  if (truth.k * kEntryBytes * count != in.remaining()) {
    throw CorruptionError("'" + path + "' payload does not match k=" + std::to_string(truth.k) +
                          ", query_count=" + std::to_string(count));
  }
  truth.lists.resize(count);
  for (auto& list : truth.lists) {
    list.resize(truth.k);
    for (auto& s : list) {
      const auto id = in.get<std::uint64_t>("doc_id");
      if (id > std::numeric_limits<DocId>::max()) throw CorruptionError("'" + path + "' has doc id out of range");
      s.doc_id = static_cast<DocId>(id);
      s.score = in.get<float>("score");
    }
  }
  return truth;
}

}  // namespace lemur
