#pragma once

// Independent reference implementations used only by tests. Nothing here
// shares code with the kernels it checks: plain nested loops in double, no
// blocking, no lane-split dot products, no Cholesky.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "lemur/corpus.hpp"
#include "lemur/synth.hpp"

namespace lemur::oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix rows_of(TokenView v) {
  Matrix out(v.tokens(), std::vector<double>(v.dim()));
  for (std::size_t i = 0; i < v.tokens(); ++i) {
    for (std::size_t k = 0; k < v.dim(); ++k) out[i][k] = v.token(i)[k];
  }
  return out;
}

inline double inner(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

// Full pair table, then row max, then sum.
inline double maxsim(TokenView query, TokenView doc) {
  const Matrix q = rows_of(query);
  const Matrix c = rows_of(doc);
  Matrix table(q.size(), std::vector<double>(c.size()));
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (std::size_t j = 0; j < c.size(); ++j) table[i][j] = inner(q[i], c[j]);
  }
  double total = 0.0;
  for (const auto& row : table) total += *std::max_element(row.begin(), row.end());
  return total;
}

struct Ranked {
  std::size_t id;
  double score;
};

// Quadratic-loop top-k: score every doc, stable sort by score over an
// id-ordered list.
inline std::vector<Ranked> topk(TokenView query, const Corpus& corpus, std::size_t k) {
  std::vector<Ranked> all;
  for (std::size_t j = 0; j < corpus.size(); ++j) {
    float s = 0.0f;  // float32 sum of float32 maxima, mirrors the library's output precision
    const Matrix q = rows_of(query);
    const Matrix c = rows_of(corpus.doc(j));
    for (const auto& x : q) {
      double best = -1e300;
      for (const auto& y : c) best = std::max(best, inner(x, y));
      s += static_cast<float>(best);
    }
    all.push_back({j, s});
  }
  std::stable_sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  all.resize(std::min(k, all.size()));
  return all;
}

inline double gelu(double z) { return 0.5 * z * (1.0 + std::erf(z / std::sqrt(2.0))); }

// psi(x) scalar by scalar in double.
template <class Params>
std::vector<double> encode(const Params& p, const std::vector<double>& x) {
  const auto dp = static_cast<std::size_t>(p.w_in.rows());
  std::vector<double> a(dp);
  for (std::size_t r = 0; r < dp; ++r) {
    double z = static_cast<double>(p.bias(static_cast<Eigen::Index>(r)));
    for (std::size_t c = 0; c < x.size(); ++c) {
      z += static_cast<double>(p.w_in(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c))) * x[c];
    }
    a[r] = gelu(z);
  }
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= static_cast<double>(dp);
  double var = 0.0;
  for (double v : a) var += (v - mean) * (v - mean);
  var /= static_cast<double>(dp);
  for (double& v : a) v = (v - mean) / std::sqrt(var + 1e-5);
  return a;
}

template <class Mat>
std::vector<double> matvec(const Mat& w, const std::vector<double>& v) {
  std::vector<double> out(static_cast<std::size_t>(w.rows()), 0.0);
  for (Eigen::Index r = 0; r < w.rows(); ++r) {
    for (Eigen::Index c = 0; c < w.cols(); ++c) out[static_cast<std::size_t>(r)] += static_cast<double>(w(r, c)) * v[static_cast<std::size_t>(c)];
  }
  return out;
}

// Ridge least squares by QR on the stacked system [Phi; sqrt(eps) I] w = [y; 0].
inline Eigen::VectorXd least_squares(const Eigen::MatrixXd& phi, const Eigen::VectorXd& y, double eps) {
  const Eigen::Index n = phi.rows();
  const Eigen::Index d = phi.cols();
  Eigen::MatrixXd a(n + d, d);
  a.topRows(n) = phi;
  a.bottomRows(d) = std::sqrt(eps) * Eigen::MatrixXd::Identity(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + d);
  b.head(n) = y;
  return a.colPivHouseholderQr().solve(b);
}

// Indices sorted by value descending, ties by index ascending.
inline std::vector<std::size_t> argsort_desc(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] > v[b]; });
  return idx;
}

inline TokenMatrix random_tokens(std::size_t t, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<float> normal(0.0f, 1.0f);
  TokenMatrix m(t, d);
  for (float& v : m.data()) v = normal(rng);
  return m;
}

inline Corpus random_corpus(std::size_t m, std::size_t d, std::size_t min_t, std::size_t max_t, std::uint64_t seed,
                            double noise = 1.0) {
  SynthConfig cfg;
  cfg.docs = m;
  cfg.dim = d;
  cfg.min_tokens = min_t;
  cfg.max_tokens = max_t;
  cfg.noise = noise;
  cfg.seed = seed;
  return synth_corpus(cfg);
}

}  // namespace lemur::oracle
