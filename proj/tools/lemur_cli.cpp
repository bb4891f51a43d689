// lemur: command-line driver. Generates synthetic corpora, computes exact
// ground truth, trains models, builds indexes, answers queries and runs the
// benchmark grid and ablations. Every command writes a key=value manifest
// next to its output (config, seeds, input digests, timings).
//
// Exit codes: 0 ok, 2 bad arguments, 3 bad or corrupt input file,
// 4 numerical failure, 5 I/O failure, 1 anything else.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "lemur/lemur.hpp"

namespace fs = std::filesystem;
using namespace lemur;

namespace {

enum ExitCode : int { kOk = 0, kUnexpected = 1, kBadArgument = 2, kBadInput = 3, kNumerical = 4, kIo = 5 };

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  std::vector<char> buf(1 << 20);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  if (in.bad()) throw IoError("read failed on '" + path + "'");
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string hex;
  char byte[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(byte, sizeof(byte), "%02x", md[i]);
    hex += byte;
  }
  return hex;
}

// Re-raises a library error with the flag that supplied the bad value.
template <class Fn>
auto for_flag(const std::string& flag, Fn&& fn) {
  try {
    return fn();
  } catch (const TrainingDivergenceError&) {
    throw;
  } catch (const ArgumentError& e) {
    throw ArgumentError(flag + ": " + e.what());
  } catch (const CorruptionError& e) {
    throw CorruptionError(flag + ": " + e.what());
  } catch (const FormatError& e) {
    throw FormatError(flag + ": " + e.what());
  } catch (const EmptyCorpusError& e) {
    throw EmptyCorpusError(flag + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(flag + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(flag + ": " + e.what());
  }
}

std::shared_ptr<const Corpus> load_corpus(const std::string& flag, const std::string& path) {
  return for_flag(flag, [&] { return std::make_shared<const Corpus>(read_corpus(path)); });
}

// Manifest shared by all commands. Keys under time. vary between runs;
// everything else is a function of the inputs and flags.
class RunRecord {
 public:
  explicit RunRecord(const std::string& command) : start_(std::chrono::steady_clock::now()) {
    manifest_.set("command", command);
    manifest_.set("format.corpus", kCorpusVersion);
    manifest_.set("format.index", kIndexFormatVersion);
  }

  Manifest& manifest() { return manifest_; }

  void input(const std::string& name, const std::string& path) {
    manifest_.set("input." + name, path);
    manifest_.set("input." + name + ".sha256", sha256_file(path));
  }

  Manifest finish() {
    Manifest out = manifest_;
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    out.set("time.finished_utc", std::string(stamp));
    out.set("time.wall_seconds",
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count());
    return out;
  }

  void write(const std::string& path) { finish().write(path); }

 private:
  Manifest manifest_;
  std::chrono::steady_clock::time_point start_;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("LEMUR_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ArgumentError("LEMUR_SEED must be an unsigned integer, got '" + std::string(env) + "'");
    }
  }
  return 42;
}

struct TrainFlags {
  IndexConfig cfg;
  std::string train_tokens;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
  auto& t = f.cfg.train;
  auto& o = f.cfg.ols;
  cmd->add_option("--train-tokens", f.train_tokens, "Embedding file whose tokens train the model (default: corpus)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--d-prime", t.d_prime, "Latent dimension")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--m-prime", t.m_prime, "Documents used in phase-1 training (clamped to m)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--n", t.n, "Phase-1 training tokens")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--batch-size", t.batch_size, "Minibatch size")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--grad-clip", t.grad_clip, "Global gradient-norm clip")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--n-prime", o.n_prime, "Tokens sampled for the least-squares head")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_option("--ridge-eps", o.ridge_eps, "Diagonal added to the least-squares Gram matrix")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
}

// Applies the corpus-dependent clamp and checks cross-flag constraints.
void finalize_train_flags(TrainFlags& f, std::uint64_t seed, std::size_t threads, const Corpus& corpus) {
  auto& t = f.cfg.train;
  t.seed = seed;
  f.cfg.ols.seed = seed;
  f.cfg.ols.threads = threads;
  if (t.m_prime > corpus.size()) {
    std::cerr << "note: --m-prime " << t.m_prime << " exceeds the corpus size; using " << corpus.size() << "\n";
    t.m_prime = corpus.size();
  }
  if (t.batch_size > t.n) {
    throw ArgumentError("--batch-size (" + std::to_string(t.batch_size) + ") must not exceed --n (" +
                        std::to_string(t.n) + ")");
  }
  if (!(t.grad_clip > 0.0)) throw ArgumentError("--grad-clip must be positive");
}

std::shared_ptr<const Corpus> token_source(const TrainFlags& f, const std::shared_ptr<const Corpus>& corpus,
                                           RunRecord& run) {
  if (f.train_tokens.empty()) return corpus;
  run.input("train_tokens", f.train_tokens);
  return load_corpus("--train-tokens", f.train_tokens);
}

std::string manifest_path(const std::string& artifact) { return artifact + ".manifest"; }

void check_k(std::size_t k, const std::vector<std::size_t>& k_primes) {
  for (std::size_t kp : k_primes) {
    if (kp < k) {
      throw ArgumentError("--k-prime value " + std::to_string(kp) + " is below --k (" + std::to_string(k) + ")");
    }
  }
}

GroundTruth load_truth(const std::string& path, const Corpus& queries) {
  GroundTruth truth = for_flag("--truth", [&] { return read_ground_truth(path); });
  if (truth.query_count() != queries.size()) {
    throw ArgumentError("--truth: '" + path + "' has " + std::to_string(truth.query_count()) +
                        " queries but --queries has " + std::to_string(queries.size()));
  }
  return truth;
}

LemurIndex open_index(const std::string& dir, const std::string& corpus_override, RunRecord& run) {
  const std::string manifest = (fs::path(dir) / "manifest.txt").string();
  const Manifest m = for_flag("--index", [&] { return Manifest::read(manifest); });
  const std::string corpus_path = corpus_override.empty() ? m.get("corpus") : corpus_override;
  run.input("corpus", corpus_path);
  run.input("index.model", (fs::path(dir) / "model.bin").string());
  run.input("index.mips", (fs::path(dir) / "mips.bin").string());
  auto corpus = load_corpus(corpus_override.empty() ? "--index (corpus path in manifest)" : "--corpus", corpus_path);
  return for_flag("--index", [&] { return load_index(dir, corpus); });
}

// ---- commands ----

struct SynthArgs {
  SynthConfig cfg;
  bool no_normalize = false;
  std::string out;
};

int cmd_synth(SynthArgs& a, std::uint64_t seed) {
  RunRecord run("synth");
  a.cfg.seed = seed;
  a.cfg.normalize = !a.no_normalize;
  if (a.cfg.min_tokens > a.cfg.max_tokens) throw ArgumentError("--min-tokens must not exceed --max-tokens");
  const Corpus corpus = synth_corpus(a.cfg);
  for_flag("--out", [&] { write_corpus(corpus, a.out); });
  auto& m = run.manifest();
  m.set("synth.docs", a.cfg.docs);
  m.set("synth.dim", a.cfg.dim);
  m.set("synth.min_tokens", a.cfg.min_tokens);
  m.set("synth.max_tokens", a.cfg.max_tokens);
  m.set("synth.noise", a.cfg.noise);
  m.set("synth.normalize", a.cfg.normalize ? 1 : 0);
  m.set("seed", seed);
  m.set("output", a.out);
  m.set("output.sha256", sha256_file(a.out));
  run.write(manifest_path(a.out));
  std::cout << "wrote " << corpus.size() << " docs, " << corpus.total_tokens() << " tokens to " << a.out << "\n";
  return kOk;
}

struct OracleArgs {
  std::string corpus, queries, out;
  std::size_t k = 100;
};

int cmd_oracle(const OracleArgs& a, std::size_t threads) {
  RunRecord run("oracle");
  run.input("corpus", a.corpus);
  run.input("queries", a.queries);
  const auto corpus = load_corpus("--corpus", a.corpus);
  const auto queries = load_corpus("--queries", a.queries);
  if (queries->dim() != corpus->dim()) throw ArgumentError("--queries dim does not match --corpus dim");
  const GroundTruth truth = brute_force_topk(*queries, *corpus, a.k, threads);
  for_flag("--out", [&] { write_ground_truth(truth, a.out); });
  auto& m = run.manifest();
  m.set("k", truth.k);
  m.set("output", a.out);
  m.set("output.sha256", sha256_file(a.out));
  run.write(manifest_path(a.out));
  std::cout << "wrote top-" << truth.k << " for " << truth.query_count() << " queries to " << a.out << "\n";
  return kOk;
}

struct TrainArgs {
  TrainFlags flags;
  std::string corpus, out;
};

int cmd_train(TrainArgs& a, std::uint64_t seed, std::size_t threads) {
  RunRecord run("train");
  run.input("corpus", a.corpus);
  const auto corpus = load_corpus("--corpus", a.corpus);
  const auto source = token_source(a.flags, corpus, run);
  finalize_train_flags(a.flags, seed, threads, *corpus);
  BuildReport report;
  const LemurModel model = build_model(*corpus, *source, a.flags.cfg, &report);
  for_flag("--out", [&] { write_model(model, a.out); });
  auto& m = run.manifest();
  describe_config(a.flags.cfg, m);
  m.set("phase1.initial_mse", report.phase1_initial_mse);
  m.set("phase1.final_mse", report.phase1_final_mse);
  m.set("target.mean", report.target_mean);
  m.set("target.std", report.target_std);
  m.set("output", a.out);
  m.set("output.sha256", sha256_file(a.out));
  run.write(manifest_path(a.out));
  std::cout << "phase-1 mse " << report.phase1_initial_mse << " -> " << report.phase1_final_mse << "; wrote "
            << a.out << "\n";
  return kOk;
}

struct IndexArgs {
  TrainFlags flags;
  std::string corpus, model, mode = "graph", out;
};

int cmd_index(IndexArgs& a, std::uint64_t seed, std::size_t threads) {
  RunRecord run("index");
  run.input("corpus", a.corpus);
  const auto corpus = load_corpus("--corpus", a.corpus);
  a.flags.cfg.mode = for_flag("--mips", [&] { return parse_mips_mode(a.mode); });
  LemurModel model;
  if (!a.model.empty()) {
    run.input("model", a.model);
    model = for_flag("--model", [&] { return read_model(a.model); });
    if (model.m_out() != corpus->size() || model.dim() != corpus->dim()) {
      throw ArgumentError("--model: '" + a.model + "' was fit for " + std::to_string(model.m_out()) +
                          " docs of dim " + std::to_string(model.dim()) + ", corpus has " +
                          std::to_string(corpus->size()) + " of dim " + std::to_string(corpus->dim()));
    }
    a.flags.cfg.train.seed = seed;
  } else {
    const auto source = token_source(a.flags, corpus, run);
    finalize_train_flags(a.flags, seed, threads, *corpus);
    model = build_model(*corpus, *source, a.flags.cfg);
  }
  const auto t0 = std::chrono::steady_clock::now();
  MipsIndex mips = build_mips(model, a.flags.cfg.mode, a.flags.cfg.graph);
  const double mips_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const LemurIndex index(std::move(model), std::move(mips), corpus);
  Manifest extra = run.finish();
  extra.set("time.mips_build_seconds", mips_seconds);
  for_flag("--out", [&] { save_index(index, a.out, a.corpus, a.flags.cfg, extra); });
  std::cout << "indexed " << corpus->size() << " docs (" << a.mode << ") into " << a.out << "\n";
  return kOk;
}

struct QueryArgs {
  std::string index, corpus, queries, truth, out;
  std::size_t k = 100;
  std::size_t k_prime = 1000;
  std::size_t ef_search = 0;
};

int cmd_query(const QueryArgs& a, std::size_t threads) {
  RunRecord run("query");
  check_k(a.k, {a.k_prime});
  if (a.ef_search != 0 && a.ef_search < a.k_prime) throw ArgumentError("--ef-search must be at least --k-prime");
  const LemurIndex index = open_index(a.index, a.corpus, run);
  run.input("queries", a.queries);
  const auto queries = load_corpus("--queries", a.queries);
  // Small corpora: k and k' shrink to m, the beam never below k'.
  const std::size_t docs = index.corpus->size();
  const std::size_t k = std::min(a.k, docs);
  const std::size_t k_prime = std::min(a.k_prime, docs);
  const SearchParams params{std::max(a.ef_search, k_prime), k_prime};
  const auto t0 = std::chrono::steady_clock::now();
  const auto results = batch_query(index, *queries, k, params, threads);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  GroundTruth out;
  out.k = k;
  for (const auto& r : results) out.lists.push_back(r.hits);
  for_flag("--out", [&] { write_ground_truth(out, a.out); });
  auto& m = run.manifest();
  m.set("k", k);
  m.set("k_prime", params.k_prime);
  m.set("ef_search", params.ef_search);
  m.set("threads", threads);
  std::cout << "answered " << queries->size() << " queries";
  if (!a.truth.empty()) {
    run.input("truth", a.truth);
    const double r = mean_recall(out.lists, load_truth(a.truth, *queries), k);
    m.set("recall", r);
    std::cout << ", recall@" << k << " " << r;
  }
  m.set("output", a.out);
  m.set("output.sha256", sha256_file(a.out));
  Manifest record = run.finish();
  record.set("time.qps", static_cast<double>(queries->size()) / std::max(seconds, 1e-9));
  record.write(manifest_path(a.out));
  std::cout << ", " << static_cast<double>(queries->size()) / std::max(seconds, 1e-9) << " qps\n";
  return kOk;
}

struct GridArgs {
  GridSpec grid;
  std::string truth, queries;
};

void add_grid_flags(CLI::App* cmd, GridArgs& g) {
  cmd->add_option("--queries", g.queries, "Query embedding file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--truth", g.truth, "Ground-truth file for the queries")->required()->check(CLI::ExistingFile);
  cmd->add_option("--k", g.grid.k, "Final result count")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--k-prime", g.grid.k_prime, "Candidate counts to sweep")->capture_default_str()->delimiter(',');
  cmd->add_option("--ef-search", g.grid.ef_search, "Beam widths to sweep (default: --ef-factors times k')")
      ->delimiter(',');
  cmd->add_option("--ef-factors", g.grid.ef_factors, "Beam widths as multiples of k'")
      ->capture_default_str()
      ->delimiter(',');
  cmd->add_option("--repetitions", g.grid.repetitions, "Timed runs per cell (best is kept)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

void record_grid(const GridSpec& grid, Manifest& m) {
  auto join = [](const auto& values) {
    std::ostringstream os;
    for (std::size_t i = 0; i < values.size(); ++i) os << (i ? "," : "") << values[i];
    return os.str();
  };
  m.set("grid.k", grid.k);
  m.set("grid.k_prime", join(grid.k_prime));
  m.set("grid.ef_search", join(grid.ef_search));
  m.set("grid.ef_factors", join(grid.ef_factors));
  m.set("grid.repetitions", grid.repetitions);
  m.set("grid.threads", grid.threads);
}

struct BenchArgs {
  GridArgs g;
  std::string index, corpus, out, front, dump_dir;
};

int cmd_bench(BenchArgs& a, std::size_t threads) {
  RunRecord run("bench");
  a.g.grid.threads = threads;
  check_k(a.g.grid.k, a.g.grid.k_prime);
  for_flag("--k-prime/--ef-search", [&] { a.g.grid.validate(); });
  const LemurIndex index = open_index(a.index, a.corpus, run);
  run.input("queries", a.g.queries);
  run.input("truth", a.g.truth);
  const auto queries = load_corpus("--queries", a.g.queries);
  const GroundTruth truth = load_truth(a.g.truth, *queries);
  const auto results = for_flag("--truth", [&] { return run_grid(index, *queries, truth, a.g.grid); });
  for_flag("--out", [&] { write_bench_csv(results, a.out); });
  if (!a.front.empty()) for_flag("--front", [&] { write_bench_csv(pareto_front(results), a.front); });
  if (!a.dump_dir.empty()) for_flag("--dump-dir", [&] { dump_bench_ids(results, a.dump_dir); });
  record_grid(a.g.grid, run.manifest());
  run.manifest().set("output", a.out);
  run.write(manifest_path(a.out));
  for (const auto& r : results) {
    std::printf("ef=%zu k'=%zu recall=%.4f qps=%.1f p50=%.3fms p99=%.3fms\n", r.ef_search, r.k_prime, r.mean_recall,
                r.qps, r.p50_ms, r.p99_ms);
  }
  return kOk;
}

struct AblateDimArgs {
  TrainFlags flags;
  std::string corpus, queries, truth, out, records;
  std::vector<std::size_t> dims{64, 128, 256, 512, 1024, 2048};
  std::vector<std::size_t> k_primes{200, 500, 1000, 2000, 5000};
  std::size_t k = 100;
};

int cmd_ablate_dim(AblateDimArgs& a, std::uint64_t seed, std::size_t threads) {
  RunRecord run("ablate-dim");
  check_k(a.k, a.k_primes);
  run.input("corpus", a.corpus);
  run.input("queries", a.queries);
  run.input("truth", a.truth);
  const auto corpus = load_corpus("--corpus", a.corpus);
  const auto queries = load_corpus("--queries", a.queries);
  const GroundTruth truth = load_truth(a.truth, *queries);
  const auto source = token_source(a.flags, corpus, run);
  finalize_train_flags(a.flags, seed, threads, *corpus);
  const LatentDimTable table =
      ablate_latent_dim(*corpus, *queries, truth, *source, a.dims, a.flags.cfg, a.k, a.k_primes, threads);
  for_flag("--out", [&] { write_latent_dim_csv(table, a.out); });
  if (!a.records.empty()) for_flag("--records", [&] { write_latent_dim_records(table, a.records); });
  describe_config(a.flags.cfg, run.manifest());
  run.manifest().set("k", a.k);
  run.write(manifest_path(a.out));
  for (std::size_t i = 0; i < table.dims.size(); ++i) {
    std::cout << "d'=" << table.dims[i];
    for (std::size_t c = 0; c < table.k_primes.size(); ++c) {
      std::cout << "  R@" << table.k_primes[c] << "=" << table.recall[i][c];
    }
    std::cout << "\n";
  }
  return kOk;
}

struct AblateAnnsArgs {
  GridArgs g;
  TrainFlags flags;
  std::string corpus, model, out_dir;
};

int cmd_ablate_anns(AblateAnnsArgs& a, std::uint64_t seed, std::size_t threads) {
  RunRecord run("ablate-anns");
  a.g.grid.threads = threads;
  check_k(a.g.grid.k, a.g.grid.k_prime);
  for_flag("--k-prime/--ef-search", [&] { a.g.grid.validate(); });
  run.input("corpus", a.corpus);
  run.input("queries", a.g.queries);
  run.input("truth", a.g.truth);
  const auto corpus = load_corpus("--corpus", a.corpus);
  const auto queries = load_corpus("--queries", a.g.queries);
  const GroundTruth truth = load_truth(a.g.truth, *queries);
  LemurModel model;
  if (!a.model.empty()) {
    run.input("model", a.model);
    model = for_flag("--model", [&] { return read_model(a.model); });
    if (model.m_out() != corpus->size()) throw ArgumentError("--model was not fit for this --corpus");
  } else {
    const auto source = token_source(a.flags, corpus, run);
    finalize_train_flags(a.flags, seed, threads, *corpus);
    model = build_model(*corpus, *source, a.flags.cfg);
  }
  const LemurIndex exact(model, build_mips(model, MipsMode::kExact), corpus);
  const LemurIndex graph(model, build_mips(model, MipsMode::kGraph, a.flags.cfg.graph), corpus);
  const AnnsAblation ab = ablate_anns(exact, graph, *queries, truth, a.g.grid);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  write_bench_csv(ab.exact_all, (dir / "exact.csv").string());
  write_bench_csv(ab.graph_all, (dir / "graph.csv").string());
  write_bench_csv(ab.exact_front, (dir / "exact_front.csv").string());
  write_bench_csv(ab.graph_front, (dir / "graph_front.csv").string());
  describe_config(a.flags.cfg, run.manifest());
  record_grid(a.g.grid, run.manifest());
  run.write((dir / "manifest.txt").string());
  for (const auto* front : {&ab.exact_front, &ab.graph_front}) {
    std::cout << (front == &ab.exact_front ? "exact" : "graph") << " front:\n";
    for (const auto& r : *front) {
      std::printf("  ef=%zu k'=%zu recall=%.4f qps=%.1f\n", r.ef_search, r.k_prime, r.mean_recall, r.qps);
    }
  }
  return kOk;
}

int run(int argc, char** argv) {
  CLI::App app{"Multi-vector retrieval via learned single-vector reduction"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  std::size_t threads = default_threads();
  bool seed_given = false;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t s) { seed = s, seed_given = true; }, "Master seed (default: $LEMUR_SEED or 42)");
    cmd->add_option("--threads", threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  };

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic multi-vector embedding file");
  c_synth->add_option("--docs", synth.cfg.docs, "Number of documents")->required()->check(CLI::PositiveNumber);
  c_synth->add_option("--dim", synth.cfg.dim, "Embedding dimension")->required()->check(CLI::PositiveNumber);
  c_synth->add_option("--min-tokens", synth.cfg.min_tokens, "Fewest tokens per document")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_synth->add_option("--max-tokens", synth.cfg.max_tokens, "Most tokens per document")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_synth->add_option("--noise", synth.cfg.noise, "Token spread around the document center")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
  c_synth->add_flag("--no-normalize", synth.no_normalize, "Keep raw token vectors instead of unit length");
  c_synth->add_option("--out", synth.out, "Output embedding file")->required();
  add_common(c_synth);

  OracleArgs oracle;
  auto* c_oracle = app.add_subcommand("oracle", "Exact top-k by brute-force MaxSim");
  c_oracle->add_option("--corpus", oracle.corpus, "Corpus embedding file")->required()->check(CLI::ExistingFile);
  c_oracle->add_option("--queries", oracle.queries, "Query embedding file")->required()->check(CLI::ExistingFile);
  c_oracle->add_option("--k", oracle.k, "Results per query")->capture_default_str()->check(CLI::PositiveNumber);
  c_oracle->add_option("--out", oracle.out, "Output ground-truth file")->required();
  add_common(c_oracle);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train the encoder and fit one output row per document");
  c_train->add_option("--corpus", train.corpus, "Corpus embedding file")->required()->check(CLI::ExistingFile);
  c_train->add_option("--out", train.out, "Output model file")->required();
  add_train_flags(c_train, train.flags);
  add_common(c_train);

  IndexArgs index;
  auto* c_index = app.add_subcommand("index", "Build an index directory (trains unless --model is given)");
  c_index->add_option("--corpus", index.corpus, "Corpus embedding file")->required()->check(CLI::ExistingFile);
  c_index->add_option("--model", index.model, "Previously trained model file")->check(CLI::ExistingFile);
  c_index->add_option("--mips", index.mode, "exact or graph")->capture_default_str();
  c_index->add_option("--degree", index.flags.cfg.graph.degree, "Graph out-degree R")
      ->capture_default_str()
      ->check(CLI::Range(2, 1 << 20));
  c_index->add_option("--build-beam", index.flags.cfg.graph.build_beam, "Graph insertion beam width")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_index->add_option("--out", index.out, "Output index directory")->required();
  add_train_flags(c_index, index.flags);
  add_common(c_index);

  QueryArgs query;
  auto* c_query = app.add_subcommand("query", "Answer a query file against an index");
  c_query->add_option("--index", query.index, "Index directory")->required()->check(CLI::ExistingDirectory);
  c_query->add_option("--corpus", query.corpus, "Corpus file (default: path recorded in the index)")
      ->check(CLI::ExistingFile);
  c_query->add_option("--queries", query.queries, "Query embedding file")->required()->check(CLI::ExistingFile);
  c_query->add_option("--truth", query.truth, "Ground truth; prints recall when given")->check(CLI::ExistingFile);
  c_query->add_option("--k", query.k, "Final results per query")->capture_default_str()->check(CLI::PositiveNumber);
  c_query->add_option("--k-prime", query.k_prime, "Candidates reranked per query (clamped to m)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_query->add_option("--ef-search", query.ef_search, "Graph beam width (default: --k-prime)");
  c_query->add_option("--out", query.out, "Output result file (ground-truth layout)")->required();
  add_common(c_query);

  BenchArgs bench;
  auto* c_bench = app.add_subcommand("bench", "Recall/QPS grid over (ef_search, k')");
  c_bench->add_option("--index", bench.index, "Index directory")->required()->check(CLI::ExistingDirectory);
  c_bench->add_option("--corpus", bench.corpus, "Corpus file (default: path recorded in the index)")
      ->check(CLI::ExistingFile);
  c_bench->add_option("--out", bench.out, "Output CSV with one row per grid cell")->required();
  c_bench->add_option("--front", bench.front, "Output CSV with the Pareto front");
  c_bench->add_option("--dump-dir", bench.dump_dir, "Directory for per-cell result id dumps");
  add_grid_flags(c_bench, bench.g);
  add_common(c_bench);

  AblateDimArgs dim;
  auto* c_dim = app.add_subcommand("ablate-dim", "Candidate recall across latent dimensions");
  c_dim->add_option("--corpus", dim.corpus, "Corpus embedding file")->required()->check(CLI::ExistingFile);
  c_dim->add_option("--queries", dim.queries, "Query embedding file")->required()->check(CLI::ExistingFile);
  c_dim->add_option("--truth", dim.truth, "Ground-truth file")->required()->check(CLI::ExistingFile);
  c_dim->add_option("--dims", dim.dims, "Latent dimensions to train")->capture_default_str()->delimiter(',');
  c_dim->add_option("--k", dim.k, "Truth items per query")->capture_default_str()->check(CLI::PositiveNumber);
  c_dim->add_option("--k-prime", dim.k_primes, "Candidate counts")->capture_default_str()->delimiter(',');
  c_dim->add_option("--out", dim.out, "Output CSV (d_prime,k_prime,recall)")->required();
  c_dim->add_option("--records", dim.records, "Output CSV with per-query recall");
  add_train_flags(c_dim, dim.flags);
  add_common(c_dim);

  AblateAnnsArgs anns;
  auto* c_anns = app.add_subcommand("ablate-anns", "Exact scan vs graph search over one model");
  c_anns->add_option("--corpus", anns.corpus, "Corpus embedding file")->required()->check(CLI::ExistingFile);
  c_anns->add_option("--model", anns.model, "Trained model file (trains when absent)")->check(CLI::ExistingFile);
  c_anns->add_option("--degree", anns.flags.cfg.graph.degree, "Graph out-degree R")
      ->capture_default_str()
      ->check(CLI::Range(2, 1 << 20));
  c_anns->add_option("--build-beam", anns.flags.cfg.graph.build_beam, "Graph insertion beam width")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_anns->add_option("--out-dir", anns.out_dir, "Directory for the four curve CSVs")->required();
  add_grid_flags(c_anns, anns.g);
  add_train_flags(c_anns, anns.flags);
  add_common(c_anns);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kBadArgument;
  }
  if (!seed_given) seed = default_seed();

  if (c_synth->parsed()) return cmd_synth(synth, seed);
  if (c_oracle->parsed()) return cmd_oracle(oracle, threads);
  if (c_train->parsed()) return cmd_train(train, seed, threads);
  if (c_index->parsed()) return cmd_index(index, seed, threads);
  if (c_query->parsed()) return cmd_query(query, threads);
  if (c_bench->parsed()) return cmd_bench(bench, threads);
  if (c_dim->parsed()) return cmd_ablate_dim(dim, seed, threads);
  return cmd_ablate_anns(anns, seed, threads);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadArgument;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const CorruptionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const EmptyCorpusError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kBadInput;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kNumerical;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnexpected;
  }
}
