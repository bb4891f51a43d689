#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "lemur/corpus.hpp"
#include "lemur/error.hpp"
#include "lemur/maxsim.hpp"
#include "lemur/mips.hpp"
#include "lemur/pipeline.hpp"

namespace lemur {

// Query-hyperparameter grid. When `ef_search` is empty, beam widths are
// `ef_factors` multiples of each k'.
struct GridSpec {
  std::vector<std::size_t> ef_search;
  std::vector<double> ef_factors{1.0, 2.0, 4.0};
  std::vector<std::size_t> k_prime{200, 500, 1000, 2000, 5000};
  std::size_t k = 100;
  std::size_t repetitions = 3;
  std::size_t threads = 1;

  void validate() const {
    if (k == 0 || repetitions == 0 || threads == 0 || k_prime.empty()) {
      throw ArgumentError("grid needs k, repetitions, threads >= 1 and at least one k_prime");
    }
    for (std::size_t kp : k_prime) {
      if (kp < k) throw ArgumentError("k_prime " + std::to_string(kp) + " is below k=" + std::to_string(k));
    }
    for (std::size_t ef : ef_search) {
      if (ef == 0) throw ArgumentError("ef_search values must be positive");
    }
    for (double f : ef_factors) {
      if (!(f > 0.0)) throw ArgumentError("ef factors must be positive");
    }
  }
};

struct BenchResult {
  std::size_t ef_search = 0;
  std::size_t k_prime = 0;
  double mean_recall = 0.0;
  double qps = 0.0;
  double p50_ms = 0.0;
  double p99_ms = 0.0;
  double mean_latency_ms = 0.0;
  std::size_t threads = 1;
  std::vector<std::vector<ScoredDoc>> per_query;  // final top-k of every query (first run)
};

// Concrete (ef_search, k_prime) cells: k' clamped to m, ef >= k', the beam
// collapsed for exact indexes, duplicates dropped.
inline std::vector<SearchParams> grid_cells(const GridSpec& grid, const MipsIndex& mips) {
  std::vector<SearchParams> cells;
  auto add = [&](std::size_t ef, std::size_t kp) {
    kp = std::min(kp, mips.size());
    ef = mips.is_graph() ? std::max(ef, kp) : kp;
    const SearchParams p{ef, kp};
    for (const auto& c : cells) {
      if (c.ef_search == p.ef_search && c.k_prime == p.k_prime) return;
    }
    cells.push_back(p);
  };
  for (std::size_t kp : grid.k_prime) {
    if (!grid.ef_search.empty()) {
      for (std::size_t ef : grid.ef_search) add(ef, kp);
    } else {
      for (double f : grid.ef_factors) add(static_cast<std::size_t>(std::llround(f * static_cast<double>(kp))), kp);
    }
  }
  return cells;
}

// Nearest-rank percentile of an unsorted sample.
inline double percentile(std::vector<double> values, double p) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(values.size())));
  return values[std::clamp<std::size_t>(rank, 1, values.size()) - 1];
}

// Mean Recall@k of final result lists against the first k truth entries.
inline double mean_recall(const std::vector<std::vector<ScoredDoc>>& results, const GroundTruth& truth,
                          std::size_t k) {
  if (results.size() != truth.query_count()) throw ArgumentError("result and truth query counts differ");
  double sum = 0.0;
  for (std::size_t q = 0; q < results.size(); ++q) {
    const std::size_t kk = std::min(k, truth.lists[q].size());
    const auto want = ids_of(std::span(truth.lists[q]).first(kk));
    if (results[q].size() < kk) throw ArgumentError("query " + std::to_string(q) + " returned fewer than k results");
    sum += recall(ids_of(std::span(results[q]).first(kk)), want);
  }
  return results.empty() ? 0.0 : sum / static_cast<double>(results.size());
}

// One BenchResult per grid cell. Recall and per-query latency come from a
// single-threaded pass; QPS is the best of `repetitions` batch runs on
// `grid.threads` workers.
inline std::vector<BenchResult> run_grid(const LemurIndex& index, const Corpus& queries, const GroundTruth& truth,
                                         const GridSpec& grid) {
  grid.validate();
  if (truth.query_count() != queries.size()) {
    throw ArgumentError("ground truth has " + std::to_string(truth.query_count()) + " queries, query set has " +
                        std::to_string(queries.size()));
  }
  if (truth.k < std::min(grid.k, index.corpus->size())) {
    throw ArgumentError("ground truth k=" + std::to_string(truth.k) + " is smaller than bench k=" +
                        std::to_string(grid.k));
  }
  using Clock = std::chrono::steady_clock;
  const std::size_t k = std::min(grid.k, index.corpus->size());
  std::vector<BenchResult> out;
  for (const SearchParams& cell : grid_cells(grid, index.mips)) {
    BenchResult r;
    r.ef_search = cell.ef_search;
    r.k_prime = cell.k_prime;
    r.threads = grid.threads;
    std::vector<double> latency_ms;
    latency_ms.reserve(queries.size());
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const auto t0 = Clock::now();
      QueryResult res = query(index, queries.doc(q), k, cell);
      latency_ms.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
      r.per_query.push_back(std::move(res.hits));
    }
    r.mean_recall = mean_recall(r.per_query, truth, k);
    double best_seconds = std::numeric_limits<double>::infinity();
    for (std::size_t rep = 0; rep < grid.repetitions; ++rep) {
      const auto t0 = Clock::now();
      const auto batch = batch_query(index, queries, k, cell, grid.threads);
      best_seconds = std::min(best_seconds, std::chrono::duration<double>(Clock::now() - t0).count());
    }
    r.qps = static_cast<double>(queries.size()) / std::max(best_seconds, 1e-9);
    r.p50_ms = percentile(latency_ms, 50.0);
    r.p99_ms = percentile(latency_ms, 99.0);
    double total = 0.0;
    for (double v : latency_ms) total += v;
    r.mean_latency_ms = latency_ms.empty() ? 0.0 : total / static_cast<double>(latency_ms.size());
    out.push_back(std::move(r));
  }
  return out;
}

inline bool dominates(const BenchResult& a, const BenchResult& b) {
  return (a.mean_recall >= b.mean_recall && a.qps > b.qps) || (a.mean_recall > b.mean_recall && a.qps >= b.qps);
}

// Non-dominated results, recall ascending.
inline std::vector<BenchResult> pareto_front(const std::vector<BenchResult>& results) {
  if (results.empty()) throw ArgumentError("pareto_front needs at least one result");
  std::vector<BenchResult> front;
  for (const auto& r : results) {
    const bool beaten = std::any_of(results.begin(), results.end(), [&](const BenchResult& o) { return dominates(o, r); });
    if (!beaten) front.push_back(r);
  }
  std::sort(front.begin(), front.end(), [](const BenchResult& a, const BenchResult& b) {
    return std::tie(a.mean_recall, b.qps, a.k_prime, a.ef_search) < std::tie(b.mean_recall, a.qps, b.k_prime, b.ef_search);
  });
  return front;
}

inline constexpr const char* kBenchCsvHeader = "ef_search,k_prime,recall,qps,p50_ms,p99_ms";

inline void write_bench_csv(const std::vector<BenchResult>& results, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << kBenchCsvHeader << '\n';
  char line[256];
  for (const auto& r : results) {
    std::snprintf(line, sizeof(line), "%zu,%zu,%.17g,%.6f,%.6f,%.6f\n", r.ef_search, r.k_prime, r.mean_recall, r.qps,
                  r.p50_ms, r.p99_ms);
    out << line;
  }
  if (!out) throw IoError("write failed on '" + path + "'");
}

inline std::vector<BenchResult> read_bench_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line) || line != kBenchCsvHeader) throw FormatError("'" + path + "' lacks the bench CSV header");
  std::vector<BenchResult> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    BenchResult r;
    if (std::sscanf(line.c_str(), "%zu,%zu,%lf,%lf,%lf,%lf", &r.ef_search, &r.k_prime, &r.mean_recall, &r.qps,
                    &r.p50_ms, &r.p99_ms) != 6) {
      throw FormatError("'" + path + "' has a malformed row: " + line);
    }
    out.push_back(r);
  }
  return out;
}

inline std::string cell_dump_name(const BenchResult& r) {
  return "ids_ef" + std::to_string(r.ef_search) + "_kp" + std::to_string(r.k_prime) + ".bin";
}

// Per-query final lists of every cell, in the ground-truth binary layout.
inline void dump_bench_ids(const std::vector<BenchResult>& results, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& r : results) {
    GroundTruth dump;
    dump.k = r.per_query.empty() ? 0 : r.per_query.front().size();
    dump.lists = r.per_query;
    write_ground_truth(dump, (std::filesystem::path(dir) / cell_dump_name(r)).string());
  }
}

// Recall k@k' of exact latent-space candidates, one table per d'.
struct LatentDimTable {
  std::vector<std::size_t> dims;
  std::vector<std::size_t> k_primes;
  std::vector<std::vector<double>> recall;                   // [dim][k']
  std::vector<std::vector<std::vector<double>>> per_query;   // [dim][k'][query]
};

// Candidate recall of exact W * Psi(X) ranking for each k' (prefixes of one
// top-max(k') list).
inline std::vector<std::vector<double>> latent_candidate_recall(const LemurModel& model, const Corpus& queries,
                                                                const GroundTruth& truth, std::size_t k,
                                                                const std::vector<std::size_t>& k_primes,
                                                                std::size_t threads = 1) {
  const MipsIndex exact = build_mips(model, MipsMode::kExact);
  const std::size_t widest = std::min(*std::max_element(k_primes.begin(), k_primes.end()), exact.size());
  std::vector<std::vector<double>> out(k_primes.size(), std::vector<double>(queries.size()));
  parallel_for(queries.size(), threads, [&](std::size_t q) {
    const auto pooled = pool_query(model, queries.doc(q));
    const auto hits = exact.search(pooled, {widest, widest}).hits;
    const auto ids = ids_of(hits);
    const std::size_t kk = std::min(k, truth.lists[q].size());
    const auto want = ids_of(std::span(truth.lists[q]).first(kk));
    for (std::size_t c = 0; c < k_primes.size(); ++c) {
      const std::size_t take = std::min(k_primes[c], ids.size());
      out[c][q] = candidate_recall(std::span(ids).first(take), want);
    }
  });
  return out;
}

inline LatentDimTable ablate_latent_dim(const Corpus& corpus, const Corpus& queries, const GroundTruth& truth,
                                        const Corpus& token_source, const std::vector<std::size_t>& dims,
                                        const IndexConfig& base, std::size_t k,
                                        const std::vector<std::size_t>& k_primes, std::size_t threads = 1) {
  if (dims.empty() || k_primes.empty()) throw ArgumentError("ablation needs at least one d' and one k'");
  if (truth.query_count() != queries.size()) throw ArgumentError("truth and query counts differ");
  LatentDimTable table{dims, k_primes, {}, {}};
  for (std::size_t d : dims) {
    IndexConfig cfg = base;
    cfg.train.d_prime = d;
    const LemurModel model = build_model(corpus, token_source, cfg);
    auto per_query = latent_candidate_recall(model, queries, truth, k, k_primes, threads);
    std::vector<double> means;
    for (const auto& col : per_query) {
      double s = 0.0;
      for (double v : col) s += v;
      means.push_back(col.empty() ? 0.0 : s / static_cast<double>(col.size()));
    }
    table.recall.push_back(std::move(means));
    table.per_query.push_back(std::move(per_query));
  }
  return table;
}

inline void write_latent_dim_csv(const LatentDimTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "d_prime,k_prime,recall\n";
  char line[128];
  for (std::size_t i = 0; i < table.dims.size(); ++i) {
    for (std::size_t c = 0; c < table.k_primes.size(); ++c) {
      std::snprintf(line, sizeof(line), "%zu,%zu,%.17g\n", table.dims[i], table.k_primes[c], table.recall[i][c]);
      out << line;
    }
  }
  if (!out) throw IoError("write failed on '" + path + "'");
}

// Per-query records: d_prime,k_prime,query,recall.
inline void write_latent_dim_records(const LatentDimTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << "d_prime,k_prime,query,recall\n";
  char line[128];
  for (std::size_t i = 0; i < table.dims.size(); ++i) {
    for (std::size_t c = 0; c < table.k_primes.size(); ++c) {
      for (std::size_t q = 0; q < table.per_query[i][c].size(); ++q) {
        std::snprintf(line, sizeof(line), "%zu,%zu,%zu,%.17g\n", table.dims[i], table.k_primes[c], q,
                      table.per_query[i][c][q]);
        out << line;
      }
    }
  }
  if (!out) throw IoError("write failed on '" + path + "'");
}

struct AnnsAblation {
  std::vector<BenchResult> exact_all;
  std::vector<BenchResult> graph_all;
  std::vector<BenchResult> exact_front;
  std::vector<BenchResult> graph_front;
};

// Exact scan vs graph search over the same model and reranking.
inline AnnsAblation ablate_anns(const LemurIndex& exact, const LemurIndex& graph, const Corpus& queries,
                                const GroundTruth& truth, const GridSpec& grid) {
  if (!(exact.model == graph.model)) throw ArgumentError("ANNS ablation needs both indexes to share one model");
  if (exact.mips.is_graph() || !graph.mips.is_graph()) {
    throw ArgumentError("ANNS ablation needs one exact and one graph index");
  }
  AnnsAblation out;
  out.exact_all = run_grid(exact, queries, truth, grid);
  out.graph_all = run_grid(graph, queries, truth, grid);
  out.exact_front = pareto_front(out.exact_all);
  out.graph_front = pareto_front(out.graph_all);
  return out;
}

}  // namespace lemur
