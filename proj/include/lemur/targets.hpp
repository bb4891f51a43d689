#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <limits>
#include <span>
#include <vector>

#include "lemur/corpus.hpp"
#include "lemur/model.hpp"
#include "lemur/parallel.hpp"

namespace lemur {

// Dense matrix of per-token targets g_l(x_i) (rows: tokens, columns: the
// documents in `doc_ids`, in order). Equivalent to calling per_token_targets
// for every row, but evaluated as blocked float32 GEMMs against gathered
// document tokens, which is what makes target generation over millions of
// (token, document) pairs affordable.
class TargetMatrixBuilder {
 public:
  static constexpr std::size_t kTokenChunk = 2048;
  static constexpr std::size_t kRowChunk = 4096;

  TargetMatrixBuilder(const Corpus& corpus, TokenView tokens)
      : corpus_(corpus), tokens_(to_matrix<float>(tokens)) {
    if (tokens.dim() != corpus.dim()) {
      throw ArgumentError("token dim " + std::to_string(tokens.dim()) + " does not match corpus dim " +
                          std::to_string(corpus.dim()));
    }
  }

  std::size_t rows() const { return static_cast<std::size_t>(tokens_.rows()); }

  // Writes g into out (rows() x doc_ids.size()), applying (g - shift) * scale.
  template <class T>
  void fill(std::span<const DocId> doc_ids, RowMatrix<T>& out, double shift = 0.0, double scale = 1.0) const {
    out.resize(tokens_.rows(), static_cast<Eigen::Index>(doc_ids.size()));
    std::size_t first = 0;
    while (first < doc_ids.size()) {
      // Gather as many documents as fit in one token chunk (at least one).
      std::size_t last = first;
      std::size_t chunk_tokens = 0;
      while (last < doc_ids.size()) {
        if (doc_ids[last] >= corpus_.size()) {
          throw ArgumentError("doc id " + std::to_string(doc_ids[last]) + " out of range");
        }
        const std::size_t t = corpus_.doc(doc_ids[last]).tokens();
        if (last > first && chunk_tokens + t > kTokenChunk) break;
        chunk_tokens += t;
        ++last;
      }
      RowMatrix<float> gathered(static_cast<Eigen::Index>(chunk_tokens), static_cast<Eigen::Index>(corpus_.dim()));
      std::vector<std::size_t> seg{0};
      for (std::size_t j = first; j < last; ++j) {
        const auto src = corpus_.doc(doc_ids[j]).data();
        std::copy(src.begin(), src.end(), gathered.data() + seg.back() * corpus_.dim());
        seg.push_back(seg.back() + corpus_.doc(doc_ids[j]).tokens());
      }
      for (Eigen::Index r0 = 0; r0 < tokens_.rows(); r0 += kRowChunk) {
        const Eigen::Index rn = std::min<Eigen::Index>(kRowChunk, tokens_.rows() - r0);
        const RowMatrix<float> scores = tokens_.middleRows(r0, rn) * gathered.transpose();
        for (Eigen::Index r = 0; r < rn; ++r) {
          const float* row = scores.row(r).data();
          for (std::size_t j = first; j < last; ++j) {
            const float best = *std::max_element(row + seg[j - first], row + seg[j - first + 1]);
            out(r0 + r, static_cast<Eigen::Index>(j)) = static_cast<T>((static_cast<double>(best) - shift) * scale);
          }
        }
      }
      first = last;
    }
  }

 private:
  const Corpus& corpus_;
  RowMatrix<float> tokens_;
};

}  // namespace lemur
