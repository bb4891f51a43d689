// Builds a small index over a synthetic corpus and compares its answers with
// brute-force MaxSim search.

#include <cstdio>
#include <memory>

#include "lemur/lemur.hpp"

int main() {
  using namespace lemur;

  SynthConfig data;
  data.docs = 2000;
  data.dim = 16;
  data.min_tokens = 4;
  data.max_tokens = 12;
  data.seed = 1;
  auto corpus = std::make_shared<const Corpus>(synth_corpus(data));
  data.docs = 50;
  data.seed = 2;
  const Corpus queries = synth_corpus(data);

  // Scaled-down training; the defaults target corpora of millions of docs.
  IndexConfig cfg;
  cfg.train.d_prime = 128;
  cfg.train.m_prime = 512;
  cfg.train.n = 8000;
  cfg.train.epochs = 20;
  cfg.train.batch_size = 256;
  cfg.ols.n_prime = 4000;
  cfg.mode = MipsMode::kGraph;
  cfg.graph = {32, 128};

  BuildReport report;
  const LemurIndex index = build_index(corpus, *corpus, cfg, &report);
  std::printf("phase-1 mse %.4f -> %.4f\n", report.phase1_initial_mse, report.phase1_final_mse);

  const std::size_t k = 10;
  const GroundTruth truth = brute_force_topk(queries, *corpus, k, 1);
  for (std::size_t k_prime : {10, 50, 200}) {
    const auto results = batch_query(index, queries, k, {2 * k_prime, k_prime}, default_threads());
    std::vector<std::vector<ScoredDoc>> lists;
    for (const auto& r : results) lists.push_back(r.hits);
    std::printf("k'=%-4zu recall@%zu = %.3f\n", k_prime, k, mean_recall(lists, truth, k));
  }

  const QueryResult first = query(index, queries.doc(0), 3, {100, 50});
  for (const auto& hit : first.hits) std::printf("doc %u  maxsim %.4f\n", hit.doc_id, hit.score);
  return 0;
}
