#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "lemur/corpus.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace lemur {
namespace {

using testing::TempDir;

TEST(CorpusFile, MinimalFileReadsBack) {
  TempDir tmp;
  const Corpus c = Corpus::from_docs(std::vector{TokenMatrix({1.0f, 0.0f}, 2)});
  write_corpus(c, tmp.file("c.mvec"));
  const Corpus back = read_corpus(tmp.file("c.mvec"));
  EXPECT_EQ(back.size(), 1u);
  EXPECT_EQ(back.dim(), 2u);
  EXPECT_EQ(back.total_tokens(), 1u);
  EXPECT_EQ(back, c);
}

TEST(CorpusFile, HeaderOffsetsAreCumulativeTokenCounts) {
  std::vector<TokenMatrix> docs{TokenMatrix(2, 4), TokenMatrix(5, 4), TokenMatrix(1, 4)};
  const Corpus c = Corpus::from_docs(docs);
  EXPECT_EQ(c.offsets(), (std::vector<std::uint64_t>{0, 2, 7, 8}));
  EXPECT_EQ(c.total_tokens(), 8u);

  TempDir tmp;
  write_corpus(c, tmp.file("c.mvec"));
  // magic(8) + version(4) + dim(4) + count(8) + dtype(4), then offsets.
  const auto bytes = io::read_file_bytes(tmp.file("c.mvec"));
  ASSERT_EQ(bytes.size(), 28 + 4 * 8 + 8 * 4 * 4u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "MVEC0001");
  std::uint64_t offsets[4];
  std::memcpy(offsets, bytes.data() + 28, sizeof(offsets));
  EXPECT_EQ(offsets[0], 0u);
  EXPECT_EQ(offsets[1], 2u);
  EXPECT_EQ(offsets[2], 7u);
  EXPECT_EQ(offsets[3], 8u);
}

TEST(CorpusFile, TruncatedPayloadIsCorruption) {
  TempDir tmp;
  const Corpus c = oracle::random_corpus(3, 4, 1, 3, 7);
  write_corpus(c, tmp.file("c.mvec"));
  std::filesystem::resize_file(tmp.file("c.mvec"), std::filesystem::file_size(tmp.file("c.mvec")) - 4);
  EXPECT_THROW(read_corpus(tmp.file("c.mvec")), CorruptionError);
}

TEST(CorpusFile, TrailingBytesAreCorruption) {
  TempDir tmp;
  write_corpus(oracle::random_corpus(2, 3, 1, 2, 1), tmp.file("c.mvec"));
  std::ofstream(tmp.file("c.mvec"), std::ios::binary | std::ios::app) << "xxxx";
  EXPECT_THROW(read_corpus(tmp.file("c.mvec")), CorruptionError);
}

TEST(CorpusFile, BadMagicAndVersionAreFormatErrors) {
  TempDir tmp;
  write_corpus(oracle::random_corpus(2, 3, 1, 2, 1), tmp.file("c.mvec"));
  auto bytes = io::read_file_bytes(tmp.file("c.mvec"));

  auto corrupt = bytes;
  corrupt[0] = 'X';
  std::ofstream(tmp.file("magic.mvec"), std::ios::binary).write(corrupt.data(), static_cast<std::streamsize>(corrupt.size()));
  EXPECT_THROW(read_corpus(tmp.file("magic.mvec")), FormatError);

  corrupt = bytes;
  corrupt[8] = 2;
  std::ofstream(tmp.file("version.mvec"), std::ios::binary).write(corrupt.data(), static_cast<std::streamsize>(corrupt.size()));
  EXPECT_THROW(read_corpus(tmp.file("version.mvec")), FormatError);
}

TEST(CorpusFile, ZeroDimOrCountIsEmptyCorpus) {
  TempDir tmp;
  io::Writer w(tmp.file("empty.mvec"));
  w.bytes(kCorpusMagic.data(), 8);
  w.put<std::uint32_t>(1);
  w.put<std::uint32_t>(4);
  w.put<std::uint64_t>(0);
  w.put<std::uint32_t>(0);
  w.put<std::uint64_t>(0);
  w.close();
  EXPECT_THROW(read_corpus(tmp.file("empty.mvec")), EmptyCorpusError);
}

TEST(CorpusFile, WritingNoDocumentsFails) {
  EXPECT_THROW(Corpus::from_docs(std::vector<TokenMatrix>{}), EmptyCorpusError);
  TempDir tmp;
  EXPECT_THROW(write_corpus(Corpus{}, tmp.file("x.mvec")), EmptyCorpusError);
}

TEST(CorpusFile, MissingFileIsIoErrorNamingPath) {
  try {
    read_corpus("/nonexistent/dir/corpus.mvec");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/dir/corpus.mvec"), std::string::npos);
  }
}

// Property: write -> read is element-wise identity and write -> read -> write
// is byte identity, over randomly shaped corpora.
TEST(CorpusFile, RoundTripProperty) {
  TempDir tmp;
  std::mt19937_64 rng(123);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t m = 1 + rng() % 40;
    const std::size_t d = 1 + rng() % 17;
    const std::size_t max_t = 1 + rng() % 9;
    const Corpus c = oracle::random_corpus(m, d, 1, max_t, rng(), 0.3 + trial * 0.1);
    write_corpus(c, tmp.file("a.mvec"));
    const Corpus back = read_corpus(tmp.file("a.mvec"));
    ASSERT_EQ(back, c);
    write_corpus(back, tmp.file("b.mvec"));
    ASSERT_TRUE(testing::same_bytes(tmp.file("a.mvec"), tmp.file("b.mvec")));
  }
}

TEST(TokenSampling, SingleTokenSource) {
  const Corpus c = Corpus::from_docs(std::vector{TokenMatrix({0.25f, -1.5f, 3.0f}, 3)});
  const TokenMatrix s = sample_training_tokens(c, 1, 9);
  EXPECT_EQ(s.data(), (std::vector<float>{0.25f, -1.5f, 3.0f}));
}

TEST(TokenSampling, DeterministicGivenSeed) {
  const Corpus c = oracle::random_corpus(500, 8, 100, 300, 5);
  const auto a = sample_training_tokens(c, 100000, 77);
  const auto b = sample_training_tokens(c, 100000, 77);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, sample_training_tokens(c, 100000, 78));
}

TEST(TokenSampling, WithReplacementRowsComeFromSource) {
  const Corpus c = oracle::random_corpus(3, 5, 3, 4, 11);
  ASSERT_LE(c.total_tokens(), 12u);
  std::set<std::vector<float>> pool;
  for (std::size_t i = 0; i < c.total_tokens(); ++i) pool.insert({c.token(i).begin(), c.token(i).end()});
  const auto s = sample_training_tokens(c, 1000, 3);
  ASSERT_EQ(s.tokens(), 1000u);
  for (std::size_t i = 0; i < s.tokens(); ++i) {
    EXPECT_TRUE(pool.contains({s.token(i).begin(), s.token(i).end()}));
  }
}

TEST(TokenSampling, WithoutReplacementDrawsDistinctRows) {
  const Corpus c = oracle::random_corpus(20, 4, 5, 5, 2);
  const auto s = sample_training_tokens(c, c.total_tokens(), 1);
  std::set<std::vector<float>> seen;
  for (std::size_t i = 0; i < s.tokens(); ++i) seen.insert({s.token(i).begin(), s.token(i).end()});
  EXPECT_EQ(seen.size(), c.total_tokens());
}

TEST(TokenSampling, ErrorsOnEmptyRequest) {
  const Corpus c = oracle::random_corpus(2, 2, 1, 1, 1);
  EXPECT_THROW(sample_training_tokens(c, 0, 1), ArgumentError);
  EXPECT_THROW(sample_training_tokens(Corpus{}, 1, 1), EmptyCorpusError);
}

TEST(TargetDocs, FullSampleIsEveryDocument) {
  const Corpus c = oracle::random_corpus(30, 2, 1, 2, 1);
  const auto ids = sample_target_docs(c, 30, 5);
  std::vector<DocId> expect(30);
  std::iota(expect.begin(), expect.end(), DocId{0});
  EXPECT_EQ(ids, expect);
}

TEST(TargetDocs, SingleDocument) {
  const Corpus c = oracle::random_corpus(1, 2, 1, 2, 1);
  EXPECT_EQ(sample_target_docs(c, 1, 5), std::vector<DocId>{0});
}

TEST(TargetDocs, DistinctAndReproducible) {
  const Corpus c = oracle::random_corpus(100, 2, 1, 2, 1);
  const auto a = sample_target_docs(c, 10, 99);
  EXPECT_EQ(a, sample_target_docs(c, 10, 99));
  EXPECT_EQ(std::set<DocId>(a.begin(), a.end()).size(), 10u);
  for (DocId id : a) EXPECT_LT(id, 100u);
}

TEST(TargetDocs, TooManyIsArgumentError) {
  const Corpus c = oracle::random_corpus(5, 2, 1, 2, 1);
  EXPECT_THROW(sample_target_docs(c, 6, 1), ArgumentError);
  EXPECT_THROW(sample_target_docs(c, 0, 1), ArgumentError);
}

}  // namespace
}  // namespace lemur
