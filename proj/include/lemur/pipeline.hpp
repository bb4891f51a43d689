#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lemur/corpus.hpp"
#include "lemur/error.hpp"
#include "lemur/manifest.hpp"
#include "lemur/maxsim.hpp"
#include "lemur/mips.hpp"
#include "lemur/model.hpp"
#include "lemur/ols.hpp"
#include "lemur/parallel.hpp"
#include "lemur/random.hpp"
#include "lemur/train.hpp"

namespace lemur {

inline constexpr std::uint32_t kIndexFormatVersion = 1;

enum class MipsMode { kExact, kGraph };

inline std::string to_string(MipsMode mode) { return mode == MipsMode::kExact ? "exact" : "graph"; }

inline MipsMode parse_mips_mode(const std::string& text) {
  if (text == "exact") return MipsMode::kExact;
  if (text == "graph") return MipsMode::kGraph;
  throw ArgumentError("unknown MIPS mode '" + text + "' (expected exact or graph)");
}

struct GraphConfig {
  std::size_t degree = MipsIndex::kDefaultDegree;
  std::size_t build_beam = MipsIndex::kDefaultBuildBeam;
};

struct IndexConfig {
  TrainConfig train;
  OlsConfig ols;
  MipsMode mode = MipsMode::kExact;
  GraphConfig graph;
};

// Training diagnostics from the two phases.
struct BuildReport {
  double phase1_initial_mse = 0.0;
  double phase1_final_mse = 0.0;
  std::vector<DocId> phase1_doc_ids;
  double target_mean = 0.0;
  double target_std = 1.0;
};

// Phase one (gradient training on m' sampled documents) followed by phase
// two (OLS rows for all m documents). Phase-one and OLS tokens are drawn
// independently from `token_source`.
inline LemurModel build_model(const Corpus& corpus, const Corpus& token_source, const IndexConfig& cfg,
                              BuildReport* report = nullptr) {
  cfg.train.validate();
  if (token_source.dim() != corpus.dim()) {
    throw ArgumentError("training-token source dim " + std::to_string(token_source.dim()) +
                        " does not match corpus dim " + std::to_string(corpus.dim()));
  }
  const TokenMatrix phase1_tokens = sample_training_tokens(token_source, cfg.train.n, cfg.train.seed);
  const TrainingSet set = build_training_set(corpus, phase1_tokens, cfg.train);
  const TrainOutcome outcome = train(set, cfg.train);
  const TokenMatrix ols_tokens =
      sample_training_tokens(token_source, cfg.ols.n_prime, derive_seed(cfg.ols.seed, SeedStream::kOlsTokens));
  if (report != nullptr) {
    report->phase1_initial_mse = outcome.initial_mse;
    report->phase1_final_mse = outcome.final_mse;
    report->phase1_doc_ids = outcome.target_doc_ids;
    report->target_mean = set.target_mean;
    report->target_std = set.target_std;
  }
  return fit_full_head(outcome.model, corpus, ols_tokens, cfg.ols);
}

inline MipsIndex build_mips(const LemurModel& model, MipsMode mode, const GraphConfig& graph = {}) {
  const auto& w = model.params.w_out;
  std::vector<float> rows(w.data(), w.data() + w.size());
  if (mode == MipsMode::kExact) return MipsIndex::build_exact(std::move(rows), model.d_prime());
  return MipsIndex::build_graph(std::move(rows), model.d_prime(), graph.degree, graph.build_beam);
}

// Trained model, MIPS index over its output rows, and the multi-vector
// corpus used for exact reranking.
struct LemurIndex {
  LemurModel model;
  MipsIndex mips;
  std::shared_ptr<const Corpus> corpus;

  LemurIndex(LemurModel model_in, MipsIndex mips_in, std::shared_ptr<const Corpus> corpus_in)
      : model(std::move(model_in)), mips(std::move(mips_in)), corpus(std::move(corpus_in)) {
    if (!corpus) throw ArgumentError("index needs a corpus");
    if (mips.size() != corpus->size() || model.m_out() != corpus->size()) {
      throw ArgumentError("index parts disagree on m: corpus " + std::to_string(corpus->size()) + ", model " +
                          std::to_string(model.m_out()) + ", mips " + std::to_string(mips.size()));
    }
    if (model.dim() != corpus->dim()) throw ArgumentError("model dim does not match corpus dim");
  }
};

inline LemurIndex build_index(std::shared_ptr<const Corpus> corpus, const Corpus& token_source,
                              const IndexConfig& cfg, BuildReport* report = nullptr) {
  LemurModel model = build_model(*corpus, token_source, cfg, report);
  MipsIndex mips = build_mips(model, cfg.mode, cfg.graph);
  return LemurIndex(std::move(model), std::move(mips), std::move(corpus));
}

struct QueryTiming {
  std::int64_t encode_ns = 0;
  std::int64_t anns_ns = 0;
  std::int64_t rerank_ns = 0;

  std::int64_t total_ns() const { return encode_ns + anns_ns + rerank_ns; }
};

struct QueryResult {
  std::vector<ScoredDoc> hits;     // exact MaxSim, ranked
  std::vector<DocId> candidates;   // MIPS candidates in MIPS rank order
  std::size_t candidates_examined = 0;
  bool clamped = false;
  QueryTiming timing;
};

// Pool -> MIPS top-k' -> exact MaxSim rerank -> top-k.
inline QueryResult query(const LemurIndex& index, TokenView q, std::size_t k, const SearchParams& params) {
  if (q.empty()) throw ArgumentError("query has no tokens");
  if (q.dim() != index.corpus->dim()) {
    throw ArgumentError("query dim " + std::to_string(q.dim()) + " does not match corpus dim " +
                        std::to_string(index.corpus->dim()));
  }
  if (k == 0 || k > params.k_prime) {
    throw ArgumentError("need 1 <= k <= k_prime (k=" + std::to_string(k) + ", k_prime=" +
                        std::to_string(params.k_prime) + ")");
  }
  using Clock = std::chrono::steady_clock;
  auto ns = [](Clock::duration d) { return std::chrono::duration_cast<std::chrono::nanoseconds>(d).count(); };
  QueryResult result;
  const auto t0 = Clock::now();
  const auto pooled = pool_query(index.model, q);
  const auto t1 = Clock::now();
  const MipsResult found = index.mips.search(pooled, params);
  const auto t2 = Clock::now();
  result.candidates = ids_of(found.hits);
  result.candidates_examined = found.hits.size();
  result.clamped = found.clamped;
  result.hits.reserve(found.hits.size());
  for (DocId id : result.candidates) result.hits.push_back({id, maxsim<float>(q, index.corpus->doc(id))});
  keep_top_k(result.hits, k);
  const auto t3 = Clock::now();
  result.timing = {ns(t1 - t0), ns(t2 - t1), ns(t3 - t2)};
  return result;
}

// Queries distributed across `threads` workers; output order and content
// match sequential calls.
inline std::vector<QueryResult> batch_query(const LemurIndex& index, const Corpus& queries, std::size_t k,
                                            const SearchParams& params, std::size_t threads) {
  if (threads == 0) throw ArgumentError("threads must be >= 1");
  std::vector<QueryResult> results(queries.size());
  parallel_for(queries.size(), threads,
               [&](std::size_t i) { results[i] = query(index, queries.doc(i), k, params); });
  return results;
}

inline std::vector<QueryResult> batch_query(const LemurIndex& index, std::span<const TokenMatrix> queries,
                                            std::size_t k, const SearchParams& params, std::size_t threads) {
  if (threads == 0) throw ArgumentError("threads must be >= 1");
  std::vector<QueryResult> results(queries.size());
  parallel_for(queries.size(), threads, [&](std::size_t i) { results[i] = query(index, queries[i], k, params); });
  return results;
}

inline void describe_config(const IndexConfig& cfg, Manifest& m) {
  m.set("train.d_prime", cfg.train.d_prime);
  m.set("train.m_prime", cfg.train.m_prime);
  m.set("train.n", cfg.train.n);
  m.set("train.lr", cfg.train.lr);
  m.set("train.epochs", cfg.train.epochs);
  m.set("train.batch_size", cfg.train.batch_size);
  m.set("train.grad_clip", cfg.train.grad_clip);
  m.set("train.seed", cfg.train.seed);
  m.set("ols.n_prime", cfg.ols.n_prime);
  m.set("ols.ridge_eps", cfg.ols.ridge_eps);
  m.set("ols.seed", cfg.ols.seed);
  m.set("mips.mode", to_string(cfg.mode));
  m.set("mips.degree", cfg.graph.degree);
  m.set("mips.build_beam", cfg.graph.build_beam);
}

// Index directory: model.bin, mips.bin and manifest.txt. The manifest
// records the corpus path, every config value and the format versions.
inline void save_index(const LemurIndex& index, const std::string& dir, const std::string& corpus_path,
                       const IndexConfig& cfg, const Manifest& extra = {}) {
  std::filesystem::create_directories(dir);
  const std::filesystem::path root(dir);
  write_model(index.model, (root / "model.bin").string());
  write_mips_index(index.mips, (root / "mips.bin").string());
  Manifest m;
  m.set("format.index", kIndexFormatVersion);
  m.set("format.corpus", kCorpusVersion);
  m.set("corpus", corpus_path);
  m.set("corpus.docs", index.corpus->size());
  m.set("corpus.dim", index.corpus->dim());
  describe_config(cfg, m);
  for (const auto& [k, v] : extra.entries()) m.set(k, v);
  m.write((root / "manifest.txt").string());
}

// Loads an index directory; the corpus comes from `corpus` when given,
// otherwise from the path recorded in the manifest.
inline LemurIndex load_index(const std::string& dir, std::shared_ptr<const Corpus> corpus = nullptr) {
  const std::filesystem::path root(dir);
  const Manifest m = Manifest::read((root / "manifest.txt").string());
  if (m.get_as<std::uint32_t>("format.index") != kIndexFormatVersion) {
    throw FormatError("'" + dir + "' uses an unsupported index format version");
  }
  if (!corpus) corpus = std::make_shared<const Corpus>(read_corpus(m.get("corpus")));
  return LemurIndex(read_model((root / "model.bin").string()), read_mips_index((root / "mips.bin").string()),
                    std::move(corpus));
}

}  // namespace lemur
