#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "lemur/binary_io.hpp"
#include "lemur/error.hpp"
#include "lemur/tokens.hpp"

namespace lemur {

template <class T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

inline constexpr double kLayerNormEps = 1e-5;

// Exact GELU, z * Phi(z).
template <class T>
inline T gelu(T z) {
  return T(0.5) * z * (T(1) + std::erf(z * T(std::numbers::sqrt2 / 2)));
}

// d/dz [z * Phi(z)] = Phi(z) + z * phi(z).
template <class T>
inline T gelu_grad(T z) {
  const T cdf = T(0.5) * (T(1) + std::erf(z * T(std::numbers::sqrt2 / 2)));
  const T pdf = std::exp(T(-0.5) * z * z) * T(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + z * pdf;
}

// Normalizes `row` in place to zero mean and unit (population) variance, no
// learned gain or bias. Returns 1/sqrt(var + eps), which the backward pass
// reuses.
template <class T>
inline T layer_norm_inplace(std::span<T> row) {
  T mean{0};
  for (T v : row) mean += v;
  mean /= static_cast<T>(row.size());
  T var{0};
  for (T v : row) var += (v - mean) * (v - mean);
  var /= static_cast<T>(row.size());
  const T inv_std = T(1) / std::sqrt(var + T(kLayerNormEps));
  for (T& v : row) v = (v - mean) * inv_std;
  return inv_std;
}

// Parameters of phi(x) = W_out * LN(GELU(W_in x + b)).
template <class T>
struct MlpParams {
  RowMatrix<T> w_in;   // d' x d
  Vector<T> bias;      // d'
  RowMatrix<T> w_out;  // m_out x d'; row j is document j's latent vector

  std::size_t dim() const { return static_cast<std::size_t>(w_in.cols()); }
  std::size_t d_prime() const { return static_cast<std::size_t>(w_in.rows()); }
  std::size_t m_out() const { return static_cast<std::size_t>(w_out.rows()); }

  template <class U>
  MlpParams<U> cast() const {
    return {w_in.template cast<U>(), bias.template cast<U>(), w_out.template cast<U>()};
  }

  bool operator==(const MlpParams& o) const {
    return same(w_in, o.w_in) && same(bias, o.bias) && same(w_out, o.w_out);
  }

 private:
  template <class M>
  static bool same(const M& a, const M& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
  }
};

// Trained model used at query time. Parameters are float32; mu and sigma
// are the global target standardization, kept for diagnostics only since
// ranking is invariant to them.
struct LemurModel {
  MlpParams<float> params;
  double target_mean = 0.0;
  double target_std = 1.0;

  std::size_t dim() const { return params.dim(); }
  std::size_t d_prime() const { return params.d_prime(); }
  std::size_t m_out() const { return params.m_out(); }

  bool operator==(const LemurModel&) const = default;
};

// psi(x) for every row of `tokens` (n x d) in precision T.
template <class T, class P>
RowMatrix<T> encode_rows(const MlpParams<P>& params, const RowMatrix<T>& tokens) {
  if (static_cast<std::size_t>(tokens.cols()) != params.dim()) {
    throw ArgumentError("token dim " + std::to_string(tokens.cols()) + " does not match model dim " +
                        std::to_string(params.dim()));
  }
  RowMatrix<T> hidden = tokens * params.w_in.template cast<T>().transpose();
  hidden.rowwise() += params.bias.template cast<T>().transpose();
  for (Eigen::Index r = 0; r < hidden.rows(); ++r) {
    for (Eigen::Index c = 0; c < hidden.cols(); ++c) hidden(r, c) = gelu(hidden(r, c));
    layer_norm_inplace(std::span<T>(hidden.row(r).data(), static_cast<std::size_t>(hidden.cols())));
  }
  return hidden;
}

template <class T>
RowMatrix<T> to_matrix(TokenView tokens) {
  RowMatrix<T> out(static_cast<Eigen::Index>(tokens.tokens()), static_cast<Eigen::Index>(tokens.dim()));
  const auto data = tokens.data();
  for (std::size_t i = 0; i < data.size(); ++i) out.data()[i] = static_cast<T>(data[i]);
  return out;
}

// psi(x) = LN(GELU(W_in x + b)) in float32.
inline std::vector<float> encode_token(const LemurModel& model, std::span<const float> x) {
  if (x.size() != model.dim()) {
    throw ArgumentError("token dim " + std::to_string(x.size()) + " does not match model dim " +
                        std::to_string(model.dim()));
  }
  if (!all_finite(x)) throw ArgumentError("token contains non-finite values");
  const Eigen::Map<const Vector<float>> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  std::vector<float> out(model.d_prime());
  Eigen::Map<Vector<float>> hv(out.data(), static_cast<Eigen::Index>(out.size()));
  hv.noalias() = model.params.w_in * xv;
  hv += model.params.bias;
  for (float& v : out) v = gelu(v);
  layer_norm_inplace(std::span<float>(out));
  return out;
}

// Psi(X) = sum over query tokens of psi(x), accumulated in token order.
inline std::vector<float> pool_query(const LemurModel& model, TokenView query) {
  if (query.empty()) throw ArgumentError("cannot pool an empty query");
  std::vector<float> pooled(model.d_prime(), 0.0f);
  for (std::size_t t = 0; t < query.tokens(); ++t) {
    const auto h = encode_token(model, query.token(t));
    for (std::size_t c = 0; c < pooled.size(); ++c) pooled[c] += h[c];
  }
  return pooled;
}

// W_out * psi(x): standardized per-document estimates of g(x).
inline std::vector<float> forward(const LemurModel& model, std::span<const float> x) {
  const auto h = encode_token(model, x);
  std::vector<float> out(model.m_out());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = dot<float>(model.params.w_out.row(static_cast<Eigen::Index>(j)).data(), h.data(), h.size());
  return out;
}

// Layout: u32 d, u32 d_prime, u64 m_out, f64 mu, f64 sigma, then W_in
// row-major f32, b f32, W_out row-major f32.
inline void write_model(const LemurModel& model, const std::string& path) {
  io::Writer out(path);
  out.put<std::uint32_t>(static_cast<std::uint32_t>(model.dim()));
  out.put<std::uint32_t>(static_cast<std::uint32_t>(model.d_prime()));
  out.put<std::uint64_t>(model.m_out());
  out.put<double>(model.target_mean);
  out.put<double>(model.target_std);
  const auto& p = model.params;
  out.put_array(std::span<const float>(p.w_in.data(), static_cast<std::size_t>(p.w_in.size())));
  out.put_array(std::span<const float>(p.bias.data(), static_cast<std::size_t>(p.bias.size())));
  out.put_array(std::span<const float>(p.w_out.data(), static_cast<std::size_t>(p.w_out.size())));
  out.close();
}

inline LemurModel read_model(const std::string& path) {
  io::Reader in(path);
  const auto dim = in.get<std::uint32_t>("d");
  const auto d_prime = in.get<std::uint32_t>("d_prime");
  const auto m_out = in.get<std::uint64_t>("m_out");
  LemurModel model;
  model.target_mean = in.get<double>("mu");
  model.target_std = in.get<double>("sigma");
  if (dim == 0 || d_prime == 0) throw FormatError("'" + path + "' declares a zero-sized model");
  if (!(model.target_std > 0.0) || !std::isfinite(model.target_mean)) {
    throw CorruptionError("'" + path + "' has invalid standardization (sigma must be > 0)");
  }
  const std::uint64_t expected = (std::uint64_t{d_prime} * dim + d_prime + m_out * d_prime) * sizeof(float);
  if (expected != in.remaining()) {
    throw CorruptionError("'" + path + "' payload is " + std::to_string(in.remaining()) + " bytes, header implies " +
                          std::to_string(expected));
  }
  auto& p = model.params;
  p.w_in.resize(d_prime, dim);
  p.bias.resize(d_prime);
  p.w_out.resize(static_cast<Eigen::Index>(m_out), d_prime);
  in.get_array(std::span<float>(p.w_in.data(), static_cast<std::size_t>(p.w_in.size())), "W_in");
  in.get_array(std::span<float>(p.bias.data(), static_cast<std::size_t>(p.bias.size())), "b");
  in.get_array(std::span<float>(p.w_out.data(), static_cast<std::size_t>(p.w_out.size())), "W_out");
  return model;
}

}  // namespace lemur
