#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <vector>

#include "lemur/binary_io.hpp"
#include "lemur/error.hpp"
#include "lemur/maxsim.hpp"
#include "lemur/tokens.hpp"

namespace lemur {

struct SearchParams {
  std::size_t ef_search = 100;
  std::size_t k_prime = 100;
};

struct MipsResult {
  std::vector<ScoredDoc> hits;  // ranked by inner product, ties by ascending id
  bool clamped = false;         // k_prime exceeded m and was reduced to m
  std::size_t scored = 0;       // inner products evaluated
};

namespace detail {

// Generation-tagged visited marks, reused across searches on one thread.
class VisitedSet {
 public:
  void reset(std::size_t size) {
    if (tags_.size() != size || generation_ == UINT32_MAX) {
      tags_.assign(size, 0);
      generation_ = 0;
    }
    ++generation_;
  }
  bool insert(std::size_t i) {
    if (tags_[i] == generation_) return false;
    tags_[i] = generation_;
    return true;
  }
  bool contains(std::size_t i) const { return tags_[i] == generation_; }

 private:
  std::vector<std::uint32_t> tags_;
  std::uint32_t generation_ = 0;
};

// Heap orderings over ranks_before: the best candidate sits on top of the
// frontier heap; the worst kept result sits on top of the result heap.
struct WorseFirst {
  bool operator()(const ScoredDoc& a, const ScoredDoc& b) const { return ranks_before(b, a); }
};
struct BestFirst {
  bool operator()(const ScoredDoc& a, const ScoredDoc& b) const { return ranks_before(a, b); }
};

}  // namespace detail

// Single-vector maximum inner product search over the rows of a (m x d')
// matrix: either an exhaustive scan or a single-layer navigable graph with
// best-first beam search. Immutable once built.
class MipsIndex {
 public:
  static constexpr std::size_t kDefaultDegree = 64;
  static constexpr std::size_t kDefaultBuildBeam = 800;

  MipsIndex() = default;

  static MipsIndex build_exact(std::vector<float> vectors, std::size_t dim) {
    MipsIndex index(std::move(vectors), dim);
    index.adjacency_.assign(index.size(), {});
    index.entry_ = index.max_norm_node(index.size());
    return index;
  }

  static MipsIndex build_graph(std::vector<float> vectors, std::size_t dim, std::size_t degree = kDefaultDegree,
                               std::size_t build_beam = kDefaultBuildBeam) {
    if (degree < 2) throw ArgumentError("graph degree R must be >= 2, got " + std::to_string(degree));
    if (build_beam == 0) throw ArgumentError("insertion beam width must be >= 1");
    MipsIndex index(std::move(vectors), dim);
    if (index.size() < 2) throw ArgumentError("graph index needs at least 2 vectors");
    index.degree_ = degree;
    index.insert_all(build_beam);
    index.repair_connectivity(build_beam);
    return index;
  }

  std::size_t size() const { return dim_ == 0 ? 0 : vectors_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  std::size_t degree() const { return degree_; }
  bool is_graph() const { return degree_ > 0; }
  DocId entry_point() const { return entry_; }
  const std::vector<std::vector<DocId>>& adjacency() const { return adjacency_; }
  const std::vector<float>& vectors() const { return vectors_; }
  std::span<const float> vector(std::size_t i) const { return std::span(vectors_).subspan(i * dim_, dim_); }

  float score(std::span<const float> q, std::size_t i) const { return dot<float>(q.data(), vectors_.data() + i * dim_, dim_); }

  MipsResult search(std::span<const float> q, const SearchParams& params) const {
    if (q.size() != dim_) {
      throw ArgumentError("query vector has dim " + std::to_string(q.size()) + ", index dim is " + std::to_string(dim_));
    }
    if (params.k_prime == 0 || params.ef_search < params.k_prime) {
      throw ArgumentError("search needs ef_search >= k_prime >= 1 (ef_search=" + std::to_string(params.ef_search) +
                          ", k_prime=" + std::to_string(params.k_prime) + ")");
    }
    MipsResult result;
    std::size_t k = params.k_prime;
    if (k > size()) {
      k = size();
      result.clamped = true;
    }
    if (!is_graph()) {
      result.hits.resize(size());
      for (std::size_t i = 0; i < size(); ++i) result.hits[i] = {static_cast<DocId>(i), score(q, i)};
      result.scored = size();
      keep_top_k(result.hits, k);
      return result;
    }
    thread_local detail::VisitedSet visited;
    result.hits = beam_search(q, std::min(std::max(params.ef_search, k), size()), visited, &result.scored);
    result.hits.resize(std::min(k, result.hits.size()));
    return result;
  }

  // Nodes reachable from the entry point by following out-edges.
  std::vector<bool> reachable() const {
    std::vector<bool> seen(size(), false);
    std::vector<DocId> parent(size());
    if (size() > 0) mark_from(entry_, seen, parent);
    return seen;
  }

  bool operator==(const MipsIndex& o) const {
    return dim_ == o.dim_ && degree_ == o.degree_ && entry_ == o.entry_ && adjacency_ == o.adjacency_ &&
           vectors_ == o.vectors_;
  }

  friend void write_mips_index(const MipsIndex& index, const std::string& path);
  friend MipsIndex read_mips_index(const std::string& path);

 private:
  MipsIndex(std::vector<float> vectors, std::size_t dim) : vectors_(std::move(vectors)), dim_(dim) {
    if (dim_ == 0 || vectors_.empty() || vectors_.size() % dim_ != 0) {
      throw ArgumentError("MIPS index needs a non-empty (m x d') matrix");
    }
  }

  // Highest-norm vector among the first `limit`, lowest id on ties.
  DocId max_norm_node(std::size_t limit) const {
    DocId best = 0;
    float best_norm = -1.0f;
    for (std::size_t i = 0; i < limit; ++i) {
      const float n = dot<float>(vector(i), vector(i));
      if (n > best_norm) {
        best_norm = n;
        best = static_cast<DocId>(i);
      }
    }
    return best;
  }

  std::vector<ScoredDoc> beam_search(std::span<const float> q, std::size_t ef, detail::VisitedSet& visited,
                                     std::size_t* scored) const {
    return beam_search([&](std::size_t i) { return score(q, i); }, entry_, ef, visited, scored);
  }

  template <class Score>
  std::vector<ScoredDoc> beam_search(const Score& score_of, DocId start_node, std::size_t ef,
                                     detail::VisitedSet& visited, std::size_t* scored) const {
    visited.reset(size());
    std::priority_queue<ScoredDoc, std::vector<ScoredDoc>, detail::WorseFirst> frontier;  // best on top
    std::priority_queue<ScoredDoc, std::vector<ScoredDoc>, detail::BestFirst> kept;       // worst on top
    const ScoredDoc start{start_node, score_of(start_node)};
    visited.insert(start_node);
    frontier.push(start);
    kept.push(start);
    std::size_t count = 1;
    while (!frontier.empty()) {
      const ScoredDoc current = frontier.top();
      if (kept.size() >= ef && ranks_before(kept.top(), current)) break;
      frontier.pop();
      for (DocId u : adjacency_[current.doc_id]) {
        if (!visited.insert(u)) continue;
        const ScoredDoc cand{u, score_of(u)};
        ++count;
        if (kept.size() < ef || ranks_before(cand, kept.top())) {
          frontier.push(cand);
          kept.push(cand);
          if (kept.size() > ef) kept.pop();
        }
      }
    }
    if (scored != nullptr) *scored = count;
    std::vector<ScoredDoc> out;
    out.reserve(kept.size());
    while (!kept.empty()) {
      out.push_back(kept.top());
      kept.pop();
    }
    std::reverse(out.begin(), out.end());
    return out;
  }

  float build_sim(std::size_t a, std::size_t b) const { return score(vector(a), b); }

  // Walks `cands` (best first, scored against `base`) and keeps a candidate
  // unless an already kept neighbor has a larger inner product with it than
  // `base` does; such a candidate is reachable through that neighbor.
  std::vector<DocId> diversify(DocId base, const std::vector<ScoredDoc>& cands) const {
    std::vector<DocId> kept;
    kept.reserve(degree_);
    for (const auto& c : cands) {
      if (kept.size() == degree_) break;
      if (c.doc_id == base) continue;
      bool occluded = false;
      for (DocId r : kept) {
        if (build_sim(r, c.doc_id) >= c.score) {
          occluded = true;
          break;
        }
      }
      if (!occluded) kept.push_back(c.doc_id);
    }
    return kept;
  }

  // Adds edge from -> to; an overflowing list is re-pruned.
  void link(DocId from, DocId to) {
    auto& edges = adjacency_[from];
    if (std::find(edges.begin(), edges.end(), to) != edges.end()) return;
    if (edges.size() < degree_) {
      edges.push_back(to);
      return;
    }
    std::vector<ScoredDoc> cands;
    cands.reserve(edges.size() + 1);
    for (DocId u : edges) cands.push_back({u, build_sim(from, u)});
    cands.push_back({to, build_sim(from, to)});
    std::sort(cands.begin(), cands.end(), ranks_before);
    edges = diversify(from, cands);
  }

  void insert_all(std::size_t build_beam) {
    adjacency_.assign(size(), {});
    entry_ = max_norm_node(size());
    // The entry goes in first, then everything else by ascending id.
    std::vector<DocId> order{entry_};
    for (std::size_t v = 0; v < size(); ++v) {
      if (v != entry_) order.push_back(static_cast<DocId>(v));
    }
    detail::VisitedSet visited;
    for (std::size_t n = 1; n < order.size(); ++n) {
      const DocId v = order[n];
      const auto found = beam_search([&](std::size_t i) { return build_sim(v, i); }, entry_,
                                     std::min(build_beam, n), visited, nullptr);
      adjacency_[v] = diversify(v, found);
      for (DocId u : adjacency_[v]) link(u, v);
    }
  }

  // Degree pruning can orphan nodes. Reachable nodes carry a spanning tree
  // (parent of each node). Each orphan is attached to the best-scoring
  // reachable host that has spare degree or a non-tree edge to give up, so
  // evictions never disconnect anything and every orphan costs one step.
  void repair_connectivity(std::size_t build_beam) {
    constexpr DocId kNone = std::numeric_limits<DocId>::max();
    std::vector<DocId> parent(size(), kNone);
    std::vector<bool> seen(size(), false);
    mark_from(entry_, seen, parent);
    detail::VisitedSet visited;
    auto give_up = [&](DocId h) -> std::optional<std::size_t> {
      const auto& edges = adjacency_[h];
      if (edges.size() < degree_) return edges.size();
      std::optional<std::size_t> worst;
      float worst_score = 0.0f;
      for (std::size_t i = 0; i < edges.size(); ++i) {
        if (parent[edges[i]] == h) continue;
        const float s = build_sim(h, edges[i]);
        if (!worst || s < worst_score || (s == worst_score && edges[i] > edges[*worst])) {
          worst = i;
          worst_score = s;
        }
      }
      return worst;
    };
    for (std::size_t u = 0; u < size(); ++u) {
      if (seen[u]) continue;
      auto closeness = [&](std::size_t i) { return build_sim(u, i); };
      std::optional<DocId> host;
      std::optional<std::size_t> slot;
      for (const auto& s : beam_search(closeness, entry_, std::min(build_beam, size()), visited, nullptr)) {
        if ((slot = give_up(s.doc_id))) {
          host = s.doc_id;
          break;
        }
      }
      if (!host) {
        std::optional<ScoredDoc> best;
        for (std::size_t v = 0; v < size(); ++v) {
          if (!seen[v] || !give_up(static_cast<DocId>(v))) continue;
          const ScoredDoc c{static_cast<DocId>(v), closeness(v)};
          if (!best || ranks_before(c, *best)) best = c;
        }
        if (!best) throw NumericalError("graph index could not be made connected from its entry point");
        host = best->doc_id;
        slot = give_up(*host);
      }
      auto& edges = adjacency_[*host];
      if (*slot == edges.size()) {
        edges.push_back(static_cast<DocId>(u));
      } else {
        edges[*slot] = static_cast<DocId>(u);
      }
      parent[u] = *host;
      mark_from(static_cast<DocId>(u), seen, parent);
    }
  }

  void mark_from(DocId start, std::vector<bool>& seen, std::vector<DocId>& parent) const {
    std::vector<DocId> stack{start};
    seen[start] = true;
    while (!stack.empty()) {
      const DocId v = stack.back();
      stack.pop_back();
      for (DocId u : adjacency_[v]) {
        if (!seen[u]) {
          seen[u] = true;
          parent[u] = v;
          stack.push_back(u);
        }
      }
    }
  }

  std::vector<float> vectors_;
  std::size_t dim_ = 0;
  std::size_t degree_ = 0;  // 0 for the exact index
  DocId entry_ = 0;
  std::vector<std::vector<DocId>> adjacency_;
};

// Layout: u64 m, u32 d_prime, u32 R, u64 entry, m x (u32 len, len x u64),
// then vectors f32 row-major. R = 0 marks an exact-scan index.
inline void write_mips_index(const MipsIndex& index, const std::string& path) {
  io::Writer out(path);
  out.put<std::uint64_t>(index.size());
  out.put<std::uint32_t>(static_cast<std::uint32_t>(index.dim_));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(index.degree_));
  out.put<std::uint64_t>(index.entry_);
  for (const auto& edges : index.adjacency_) {
    out.put<std::uint32_t>(static_cast<std::uint32_t>(edges.size()));
    for (DocId u : edges) out.put<std::uint64_t>(u);
  }
  out.put_array(std::span<const float>(index.vectors_));
  out.close();
}

inline MipsIndex read_mips_index(const std::string& path) {
  io::Reader in(path);
  const auto m = in.get<std::uint64_t>("m");
  const auto dim = in.get<std::uint32_t>("d_prime");
  const auto degree = in.get<std::uint32_t>("R");
  const auto entry = in.get<std::uint64_t>("entry");
  if (m == 0 || dim == 0) throw FormatError("'" + path + "' declares an empty index");
  if (entry >= m) throw CorruptionError("'" + path + "' entry point out of range");
  if (m > in.remaining() / sizeof(std::uint32_t)) throw CorruptionError("'" + path + "' is truncated");
  MipsIndex index;
  index.dim_ = dim;
  index.degree_ = degree;
  index.entry_ = static_cast<DocId>(entry);
  index.adjacency_.resize(m);
  for (auto& edges : index.adjacency_) {
    const auto len = in.get<std::uint32_t>("adjacency length");
    if (len > degree) throw CorruptionError("'" + path + "' has a node with degree above R");
    edges.resize(len);
    for (auto& u : edges) {
      const auto id = in.get<std::uint64_t>("edge");
      if (id >= m) throw CorruptionError("'" + path + "' has an edge to a missing node");
      u = static_cast<DocId>(id);
    }
  }
  if (m * dim * sizeof(float) != in.remaining()) {
    throw CorruptionError("'" + path + "' vector payload does not match m x d_prime");
  }
  index.vectors_.resize(m * dim);
  in.get_array(std::span(index.vectors_), "vectors");
  return index;
}

}  // namespace lemur
