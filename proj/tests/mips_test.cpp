#include <gtest/gtest.h>

#include <fstream>
#include <random>
#include <set>

#include "lemur/mips.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace lemur {
namespace {

std::vector<float> gaussian_rows(std::size_t m, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0f, 1.0f);
  std::vector<float> v(m * d);
  for (float& x : v) x = normal(rng);
  return v;
}

std::vector<double> scores_of(const std::vector<float>& rows, std::size_t d, std::span<const float> q) {
  std::vector<double> s(rows.size() / d);
  for (std::size_t i = 0; i < s.size(); ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < d; ++k) acc += static_cast<double>(rows[i * d + k]) * q[k];
    s[i] = acc;
  }
  return s;
}

double overlap(const MipsResult& a, const MipsResult& b) {
  std::set<DocId> truth;
  for (const auto& h : b.hits) truth.insert(h.doc_id);
  std::size_t hit = 0;
  for (const auto& h : a.hits) hit += truth.count(h.doc_id);
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

TEST(ExactMips, SingleVectorAlwaysReturned) {
  const MipsIndex index = MipsIndex::build_exact({0.3f, -0.2f}, 2);
  for (const std::vector<float>& q : {std::vector<float>{1, 0}, {-5, 2}, {0, 0}}) {
    const MipsResult r = index.search(q, {1, 1});
    ASSERT_EQ(r.hits.size(), 1u);
    EXPECT_EQ(r.hits[0].doc_id, 0u);
  }
}

TEST(ExactMips, FullListSortedByInnerProduct) {
  const auto rows = gaussian_rows(50, 7, 1);
  const MipsIndex index = MipsIndex::build_exact(rows, 7);
  const auto q = gaussian_rows(1, 7, 2);
  const MipsResult r = index.search(q, {50, 50});
  ASSERT_EQ(r.hits.size(), 50u);
  EXPECT_FALSE(r.clamped);
  for (std::size_t i = 1; i < r.hits.size(); ++i) EXPECT_GE(r.hits[i - 1].score, r.hits[i].score);
}

TEST(ExactMips, MatchesArgsortOracle) {
  const auto rows = gaussian_rows(300, 12, 3);
  const MipsIndex index = MipsIndex::build_exact(rows, 12);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto q = gaussian_rows(1, 12, 100 + s);
    const auto order = oracle::argsort_desc(scores_of(rows, 12, q));
    const MipsResult r = index.search(q, {40, 40});
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(r.hits[i].doc_id, order[i]) << "query " << s << " rank " << i;
  }
}

TEST(ExactMips, TiesBreakByAscendingId) {
  const MipsIndex index = MipsIndex::build_exact({1, 0, 2, 0, 1, 0, 2, 0}, 2);
  const MipsResult r = index.search(std::vector<float>{1, 0}, {4, 4});
  const std::vector<DocId> expected{1, 3, 0, 2};
  EXPECT_EQ(ids_of(r.hits), expected);
}

TEST(ExactMips, SelfSimilarityRanksFirst) {
  auto rows = gaussian_rows(64, 16, 4);
  for (std::size_t i = 0; i < 64; ++i) {
    float n = 0;
    for (std::size_t k = 0; k < 16; ++k) n += rows[i * 16 + k] * rows[i * 16 + k];
    for (std::size_t k = 0; k < 16; ++k) rows[i * 16 + k] /= std::sqrt(n);
  }
  const MipsIndex index = MipsIndex::build_exact(rows, 16);
  for (std::size_t i = 0; i < 64; ++i) EXPECT_EQ(index.search(index.vector(i), {1, 1}).hits[0].doc_id, i);
}

TEST(ExactMips, KPrimeAboveMIsClamped) {
  const MipsIndex index = MipsIndex::build_exact(gaussian_rows(5, 3, 5), 3);
  const MipsResult r = index.search(gaussian_rows(1, 3, 6), {20, 10});
  EXPECT_TRUE(r.clamped);
  EXPECT_EQ(r.hits.size(), 5u);
}

TEST(ExactMips, InvalidSearchParamsRejected) {
  const MipsIndex index = MipsIndex::build_exact(gaussian_rows(5, 3, 5), 3);
  const auto q = gaussian_rows(1, 3, 6);
  EXPECT_THROW(index.search(q, {5, 0}), ArgumentError);
  EXPECT_THROW(index.search(q, {2, 3}), ArgumentError);
  EXPECT_THROW(index.search(gaussian_rows(1, 4, 6), {3, 3}), ArgumentError);
}

TEST(GraphMips, TwoNodesLinkEachOther) {
  const MipsIndex index = MipsIndex::build_graph({1, 0, 0, 1}, 2, 2, 4);
  ASSERT_EQ(index.adjacency().size(), 2u);
  EXPECT_EQ(index.adjacency()[0], std::vector<DocId>{1});
  EXPECT_EQ(index.adjacency()[1], std::vector<DocId>{0});
}

TEST(GraphMips, DegreeBelowTwoRejected) {
  EXPECT_THROW(MipsIndex::build_graph(gaussian_rows(10, 3, 1), 3, 1, 10), ArgumentError);
  EXPECT_THROW(MipsIndex::build_graph(gaussian_rows(1, 3, 1), 3, 4, 10), ArgumentError);
}

TEST(GraphMips, DegreeBoundAndConnectivity) {
  for (std::size_t degree : {2u, 4u, 16u}) {
    const MipsIndex index = MipsIndex::build_graph(gaussian_rows(400, 8, 7 + degree), 8, degree, 32);
    const auto seen = index.reachable();
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) << "degree " << degree;
    for (std::size_t v = 0; v < index.size(); ++v) {
      const auto& edges = index.adjacency()[v];
      EXPECT_LE(edges.size(), degree);
      EXPECT_EQ(std::set<DocId>(edges.begin(), edges.end()).size(), edges.size());
      for (DocId u : edges) {
        EXPECT_LT(u, index.size());
        EXPECT_NE(u, v);
      }
    }
  }
}

TEST(GraphMips, EntryPointHasMaxNorm) {
  const auto rows = gaussian_rows(200, 6, 8);
  const MipsIndex index = MipsIndex::build_graph(rows, 6, 8, 32);
  std::vector<double> norms;
  for (std::size_t i = 0; i < 200; ++i) norms.push_back(oracle::inner({rows.begin() + i * 6, rows.begin() + i * 6 + 6},
                                                                      {rows.begin() + i * 6, rows.begin() + i * 6 + 6}));
  EXPECT_EQ(index.entry_point(), oracle::argsort_desc(norms)[0]);
}

// Exhaustive beam: with ef = m every reachable node is scored, so on a
// connected graph the result equals the exact scan.
TEST(GraphMips, FullBeamEqualsExactScan) {
  const auto rows = gaussian_rows(1000, 16, 9);
  const MipsIndex graph = MipsIndex::build_graph(rows, 16, 16, 64);
  const MipsIndex exact = MipsIndex::build_exact(rows, 16);
  for (std::uint64_t s = 0; s < 50; ++s) {
    const auto q = gaussian_rows(1, 16, 500 + s);
    const MipsResult g = graph.search(q, {1000, 10});
    const MipsResult e = exact.search(q, {10, 10});
    EXPECT_EQ(g.scored, 1000u);
    EXPECT_EQ(ids_of(g.hits), ids_of(e.hits));
  }
}

TEST(GraphMips, ReturnedScoresAreExactInnerProducts) {
  const auto rows = gaussian_rows(500, 10, 10);
  const MipsIndex graph = MipsIndex::build_graph(rows, 10, 12, 40);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto q = gaussian_rows(1, 10, 700 + s);
    const MipsResult r = graph.search(q, {50, 20});
    EXPECT_EQ(r.hits.size(), 20u);
    EXPECT_LE(r.scored, 500u);
    for (const auto& h : r.hits) EXPECT_EQ(h.score, dot<float>(q.data(), rows.data() + h.doc_id * 10, 10));
  }
}

TEST(GraphMips, MeanRecallNonDecreasingInBeamWidth) {
  const auto rows = gaussian_rows(3000, 16, 11);
  const MipsIndex graph = MipsIndex::build_graph(rows, 16, 8, 24);
  const MipsIndex exact = MipsIndex::build_exact(rows, 16);
  std::vector<std::vector<float>> queries;
  for (std::uint64_t s = 0; s < 100; ++s) queries.push_back(gaussian_rows(1, 16, 900 + s));
  double previous = 0.0;
  for (std::size_t ef : {10u, 20u, 40u, 80u, 160u, 320u, 3000u}) {
    double total = 0.0;
    for (const auto& q : queries) total += overlap(graph.search(q, {ef, 10}), exact.search(q, {10, 10}));
    const double mean = total / 100.0;
    EXPECT_GE(mean, previous - 0.01) << "ef " << ef;
    previous = mean;
  }
  EXPECT_EQ(previous, 1.0);
}

TEST(GraphMips, BuildIsDeterministic) {
  const auto rows = gaussian_rows(600, 8, 12);
  EXPECT_EQ(MipsIndex::build_graph(rows, 8, 10, 30), MipsIndex::build_graph(rows, 8, 10, 30));
}

TEST(MipsFile, RoundTripsBothKinds) {
  testing::TempDir dir;
  const auto rows = gaussian_rows(120, 5, 13);
  for (const MipsIndex& index : {MipsIndex::build_exact(rows, 5), MipsIndex::build_graph(rows, 5, 6, 20)}) {
    const std::string a = dir.file("a.bin");
    const std::string b = dir.file("b.bin");
    write_mips_index(index, a);
    const MipsIndex back = read_mips_index(a);
    EXPECT_EQ(back, index);
    write_mips_index(back, b);
    EXPECT_TRUE(testing::same_bytes(a, b));
  }
}

TEST(MipsFile, TruncationDetected) {
  testing::TempDir dir;
  const std::string path = dir.file("g.bin");
  write_mips_index(MipsIndex::build_graph(gaussian_rows(40, 4, 14), 4, 4, 10), path);
  const auto bytes = io::read_file_bytes(path);
  for (std::size_t cut : {std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    std::ofstream(path, std::ios::binary | std::ios::trunc).write(reinterpret_cast<const char*>(bytes.data()),
                                                                  static_cast<std::streamsize>(cut));
    EXPECT_THROW(read_mips_index(path), CorruptionError) << "cut " << cut;
  }
}

}  // namespace
}  // namespace lemur
