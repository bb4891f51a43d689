#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lemur/error.hpp"

namespace lemur {

using DocId = std::uint32_t;

// Inner product with a fixed accumulation order: eight interleaved partial
// sums reduced pairwise. Every score in the library (oracle, rerank, MIPS)
// goes through this kernel, so equal inputs give bit-identical scores on
// every path.
template <class Acc = float, class T>
inline Acc dot(const T* a, const T* b, std::size_t n) {
  Acc lane[8] = {};
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    for (std::size_t l = 0; l < 8; ++l) lane[l] += static_cast<Acc>(a[k + l]) * static_cast<Acc>(b[k + l]);
  }
  for (std::size_t l = 0; k < n; ++k, ++l) lane[l] += static_cast<Acc>(a[k]) * static_cast<Acc>(b[k]);
  return ((lane[0] + lane[1]) + (lane[2] + lane[3])) + ((lane[4] + lane[5]) + (lane[6] + lane[7]));
}

template <class Acc = float, class T>
inline Acc dot(std::span<const T> a, std::span<const T> b) {
  assert(a.size() == b.size());
  return dot<Acc>(a.data(), b.data(), a.size());
}

// Non-owning row-major (tokens x dim) view of token embeddings.
class TokenView {
 public:
  TokenView() = default;
  TokenView(std::span<const float> data, std::size_t dim) : data_(data), dim_(dim) {
    assert(dim == 0 || data.size() % dim == 0);
  }

  std::size_t dim() const { return dim_; }
  std::size_t tokens() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return tokens() == 0; }
  std::span<const float> token(std::size_t i) const { return data_.subspan(i * dim_, dim_); }
  std::span<const float> data() const { return data_; }

 private:
  std::span<const float> data_;
  std::size_t dim_ = 0;
};

// Owning token matrix. A multi-vector document or query is one of these.
class TokenMatrix {
 public:
  TokenMatrix() = default;
  explicit TokenMatrix(std::size_t dim) : dim_(dim) {}
  TokenMatrix(std::size_t tokens, std::size_t dim) : data_(tokens * dim, 0.0f), dim_(dim) {}
  TokenMatrix(std::vector<float> data, std::size_t dim) : data_(std::move(data)), dim_(dim) {
    if (dim_ == 0 || data_.size() % dim_ != 0) {
      throw ArgumentError("token buffer of " + std::to_string(data_.size()) + " floats is not a multiple of dim " +
                          std::to_string(dim_));
    }
  }

  std::size_t dim() const { return dim_; }
  std::size_t tokens() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
  bool empty() const { return tokens() == 0; }

  std::span<float> token(std::size_t i) { return std::span(data_).subspan(i * dim_, dim_); }
  std::span<const float> token(std::size_t i) const { return std::span(data_).subspan(i * dim_, dim_); }

  void push_back(std::span<const float> token) {
    if (token.size() != dim_) throw ArgumentError("token has dimension " + std::to_string(token.size()) +
                                                  ", expected " + std::to_string(dim_));
    data_.insert(data_.end(), token.begin(), token.end());
  }

  const std::vector<float>& data() const { return data_; }
  std::vector<float>& data() { return data_; }

  TokenView view() const { return TokenView(data_, dim_); }
  operator TokenView() const { return view(); }  // NOLINT(google-explicit-constructor)

  bool operator==(const TokenMatrix&) const = default;

 private:
  std::vector<float> data_;
  std::size_t dim_ = 0;
};

using MultiVectorDoc = TokenMatrix;

inline bool all_finite(std::span<const float> values) {
  for (float v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace lemur
