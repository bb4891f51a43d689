#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include "lemur/maxsim.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace lemur {
namespace {

TEST(MaxSim, IdentityCase) {
  const TokenMatrix x({1.0f, 0.0f}, 2);
  EXPECT_EQ(maxsim(x, x), 1.0f);
}

TEST(MaxSim, HandEvaluatedTwoByTwo) {
  const TokenMatrix x({1.0f, 0.0f, 0.0f, 1.0f}, 2);
  const TokenMatrix c({0.5f, 0.5f, 1.0f, -1.0f}, 2);
  EXPECT_EQ(maxsim(x, c), 1.5f);
}

TEST(MaxSim, MatchesPairTableOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = oracle::random_tokens(3, 8, rng);
    const auto c = oracle::random_tokens(4, 8, rng);
    EXPECT_NEAR(maxsim<double>(x, c), oracle::maxsim(x, c), 1e-12);
    EXPECT_NEAR(maxsim<float>(x, c), oracle::maxsim(x, c), 1e-5 * std::max(1.0, std::abs(oracle::maxsim(x, c))));
  }
}

TEST(MaxSim, LongDocumentsCrossTokenBlocks) {
  std::mt19937_64 rng(2);
  const auto x = oracle::random_tokens(5, 33, rng);
  const auto c = oracle::random_tokens(200, 33, rng);
  EXPECT_NEAR(maxsim<double>(x, c), oracle::maxsim(x, c), 1e-10);
}

TEST(MaxSim, DimensionMismatchIsArgumentError) {
  EXPECT_THROW(maxsim(TokenMatrix({1.0f, 0.0f}, 2), TokenMatrix({1.0f, 0.0f, 0.0f}, 3)), ArgumentError);
}

TEST(PerTokenTargets, HandCases) {
  const Corpus c = Corpus::from_docs(std::vector{TokenMatrix({1.0f, 0.0f, -1.0f, 0.0f}, 2)});
  const std::vector<DocId> ids{0};
  const std::vector<float> e1{1.0f, 0.0f};
  EXPECT_EQ(per_token_targets(e1, c, ids), std::vector<float>{1.0f});
  const std::vector<float> zero{0.0f, 0.0f};
  const Corpus many = oracle::random_corpus(6, 2, 1, 4, 3);
  const std::vector<DocId> all{0, 1, 2, 3, 4, 5};
  for (float v : per_token_targets(zero, many, all)) EXPECT_EQ(v, 0.0f);
}

TEST(PerTokenTargets, MatchesNaiveScan) {
  std::mt19937_64 rng(3);
  const Corpus c = oracle::random_corpus(5, 12, 2, 9, 4);
  const std::vector<DocId> ids{4, 0, 2, 1, 3};
  const auto x = oracle::random_tokens(1, 12, rng);
  const auto got = per_token_targets<double>(x.token(0), c, ids);
  for (std::size_t l = 0; l < ids.size(); ++l) {
    EXPECT_NEAR(got[l], oracle::maxsim(x, c.doc(ids[l])), 1e-12);
  }
}

TEST(PerTokenTargets, OutOfRangeIdIsArgumentError) {
  const Corpus c = oracle::random_corpus(2, 2, 1, 1, 1);
  const std::vector<float> x{1.0f, 1.0f};
  const std::vector<DocId> ids{2};
  EXPECT_THROW(per_token_targets(x, c, ids), ArgumentError);
}

// Property: MaxSim decomposes into per-token contributions.
TEST(MaxSimProperties, DecompositionIdentity) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 40; ++trial) {
    const Corpus c = oracle::random_corpus(3, 16, 1, 12, rng());
    const auto x = oracle::random_tokens(1 + rng() % 10, 16, rng);
    for (DocId j = 0; j < c.size(); ++j) {
      const std::vector<DocId> one{j};
      double sum64 = 0.0;
      float sum32 = 0.0f;
      for (std::size_t t = 0; t < x.tokens(); ++t) {
        sum64 += per_token_targets<double>(x.token(t), c, one)[0];
        sum32 += per_token_targets<float>(x.token(t), c, one)[0];
      }
      const double ref64 = maxsim<double>(x, c.doc(j));
      const float ref32 = maxsim<float>(x, c.doc(j));
      EXPECT_LE(std::abs(sum64 - ref64), 1e-12 * std::max(1.0, std::abs(ref64)));
      EXPECT_LE(std::abs(sum32 - ref32), 1e-5f * std::max(1.0f, std::abs(ref32)));
    }
  }
}

TEST(MaxSimProperties, PermutationInvariance) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = oracle::random_tokens(6, 10, rng);
    const auto c = oracle::random_tokens(7, 10, rng);
    std::vector<std::size_t> order(c.tokens());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    TokenMatrix shuffled(10);
    for (std::size_t i : order) shuffled.push_back(c.token(i));
    // Doc-token order: exact (max is order independent).
    EXPECT_EQ(maxsim(x, c), maxsim(x, shuffled));

    std::vector<std::size_t> qorder(x.tokens());
    std::iota(qorder.begin(), qorder.end(), 0);
    std::shuffle(qorder.begin(), qorder.end(), rng);
    TokenMatrix xq(10);
    for (std::size_t i : qorder) xq.push_back(x.token(i));
    const float a = maxsim(x, c);
    const float b = maxsim(xq, c);
    EXPECT_LE(std::abs(a - b), 1e-6f * std::max(1.0f, std::abs(a)));
  }
}

TEST(MaxSimProperties, ScaleCovariance) {
  std::mt19937_64 rng(7);
  for (double alpha : {0.5, 2.0, 3.7}) {
    const auto x = oracle::random_tokens(4, 8, rng);
    const auto c = oracle::random_tokens(5, 8, rng);
    TokenMatrix scaled = x;
    for (float& v : scaled.data()) v = static_cast<float>(v * alpha);
    const double base = maxsim<double>(x, c);
    EXPECT_LE(std::abs(maxsim<double>(scaled, c) - alpha * base), 1e-6 * std::abs(alpha * base));
  }
}

TEST(BruteForce, SingleDocument) {
  const Corpus c = oracle::random_corpus(1, 4, 2, 3, 1);
  const Corpus q = oracle::random_corpus(1, 4, 2, 3, 2);
  const GroundTruth t = brute_force_topk(q, c, 1);
  ASSERT_EQ(t.lists.size(), 1u);
  ASSERT_EQ(t.lists[0].size(), 1u);
  EXPECT_EQ(t.lists[0][0].doc_id, 0u);
  EXPECT_EQ(t.lists[0][0].score, maxsim(q.doc(0), c.doc(0)));
}

TEST(BruteForce, KAtLeastMReturnsAllSorted) {
  const Corpus c = oracle::random_corpus(12, 4, 2, 3, 1);
  const Corpus q = oracle::random_corpus(3, 4, 2, 3, 2);
  const GroundTruth t = brute_force_topk(q, c, 50);
  EXPECT_EQ(t.k, 12u);
  for (const auto& list : t.lists) {
    ASSERT_EQ(list.size(), 12u);
    EXPECT_TRUE(std::is_sorted(list.begin(), list.end(), ranks_before));
  }
}

TEST(BruteForce, MatchesIndependentQuadraticReference) {
  const Corpus c = oracle::random_corpus(50, 16, 2, 10, 8);
  const Corpus q = oracle::random_corpus(5, 16, 4, 8, 9);
  const GroundTruth t = brute_force_topk(q, c, 10, 3);
  for (std::size_t qi = 0; qi < q.size(); ++qi) {
    const auto ref = oracle::topk(q.doc(qi), c, 10);
    ASSERT_EQ(t.lists[qi].size(), ref.size());
    for (std::size_t r = 0; r < ref.size(); ++r) {
      EXPECT_EQ(t.lists[qi][r].doc_id, ref[r].id);
      EXPECT_NEAR(t.lists[qi][r].score, ref[r].score, 1e-4 * std::max(1.0, std::abs(ref[r].score)));
    }
  }
}

TEST(BruteForce, TiesBreakByAscendingId) {
  const TokenMatrix doc({1.0f, 0.0f}, 2);
  const Corpus c = Corpus::from_docs(std::vector{doc, TokenMatrix({0.0f, 1.0f}, 2), doc, doc});
  const Corpus q = Corpus::from_docs(std::vector{TokenMatrix({1.0f, 0.0f}, 2)});
  const GroundTruth t = brute_force_topk(q, c, 4);
  EXPECT_EQ(ids_of(t.lists[0]), (std::vector<DocId>{0, 2, 3, 1}));
}

TEST(BruteForce, ZeroKIsArgumentError) {
  const Corpus c = oracle::random_corpus(2, 2, 1, 1, 1);
  EXPECT_THROW(brute_force_topk(c, c, 0), ArgumentError);
}

TEST(Recall, Cases) {
  const std::vector<DocId> a{1, 2, 3, 4};
  EXPECT_EQ(recall(a, a), 1.0);
  EXPECT_EQ(recall(a, std::vector<DocId>{5, 6, 7, 8}), 0.0);
  EXPECT_EQ(recall(a, std::vector<DocId>{3, 4, 5, 6}), 0.5);
  EXPECT_THROW(recall(a, std::vector<DocId>{1, 2}), ArgumentError);
}

TEST(GroundTruthFile, RoundTripBytes) {
  testing::TempDir tmp;
  const Corpus c = oracle::random_corpus(30, 6, 1, 5, 1);
  const Corpus q = oracle::random_corpus(4, 6, 1, 5, 2);
  const GroundTruth t = brute_force_topk(q, c, 7);
  write_ground_truth(t, tmp.file("a.gt"));
  const GroundTruth back = read_ground_truth(tmp.file("a.gt"));
  EXPECT_EQ(back, t);
  write_ground_truth(back, tmp.file("b.gt"));
  EXPECT_TRUE(testing::same_bytes(tmp.file("a.gt"), tmp.file("b.gt")));
  EXPECT_EQ(std::filesystem::file_size(tmp.file("a.gt")), 12u + 4 * 7 * 12u);
}

TEST(GroundTruthFile, TruncationDetected) {
  testing::TempDir tmp;
  const Corpus c = oracle::random_corpus(5, 3, 1, 2, 1);
  write_ground_truth(brute_force_topk(c, c, 2), tmp.file("a.gt"));
  std::filesystem::resize_file(tmp.file("a.gt"), std::filesystem::file_size(tmp.file("a.gt")) - 1);
  EXPECT_THROW(read_ground_truth(tmp.file("a.gt")), CorruptionError);
}

}  // namespace
}  // namespace lemur
