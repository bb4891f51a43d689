#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lemur/corpus.hpp"
#include "lemur/error.hpp"
#include "lemur/model.hpp"
#include "lemur/random.hpp"
#include "lemur/targets.hpp"

namespace lemur {

struct TrainConfig {
  std::size_t d_prime = 2048;
  std::size_t m_prime = 8192;
  std::size_t n = 100000;
  double lr = 0.003;
  std::size_t epochs = 100;
  std::size_t batch_size = 512;
  double grad_clip = 0.5;
  std::uint64_t seed = 42;

  void validate() const {
    if (d_prime == 0 || m_prime == 0 || n == 0 || epochs == 0 || batch_size == 0) {
      throw ArgumentError("d_prime, m_prime, n, epochs and batch_size must all be positive");
    }
    if (!(lr > 0.0) || !(grad_clip > 0.0)) throw ArgumentError("lr and grad_clip must be positive");
    if (batch_size > n) {
      throw ArgumentError("batch_size=" + std::to_string(batch_size) + " exceeds n=" + std::to_string(n));
    }
  }
};

// Sampled token inputs with globally standardized MaxSim-contribution targets.
struct TrainingSet {
  RowMatrix<double> inputs;   // n x d
  RowMatrix<double> targets;  // n x m', (g - mu) / sigma
  double target_mean = 0.0;
  double target_std = 1.0;
  std::vector<DocId> target_doc_ids;

  std::size_t size() const { return static_cast<std::size_t>(inputs.rows()); }
};

// Global mean and population standard deviation of every entry; a zero
// spread falls back to sigma = 1.
template <class Derived>
std::pair<double, double> global_standardization(const Eigen::MatrixBase<Derived>& raw) {
  const double count = static_cast<double>(raw.size());
  const double mean = raw.sum() / count;
  const double var = (raw.array() - mean).square().sum() / count;
  const double sd = std::sqrt(var);
  return {mean, sd > 0.0 ? sd : 1.0};
}

inline TrainingSet build_training_set(const Corpus& corpus, TokenView tokens, const TrainConfig& cfg) {
  if (tokens.empty()) throw ArgumentError("training set needs at least one token");
  TrainingSet set;
  set.target_doc_ids = sample_target_docs(corpus, cfg.m_prime, cfg.seed);
  set.inputs = to_matrix<double>(tokens);
  TargetMatrixBuilder(corpus, tokens).fill(std::span<const DocId>(set.target_doc_ids), set.targets);
  const auto [mean, sd] = global_standardization(set.targets);
  set.target_mean = mean;
  set.target_std = sd;
  set.targets = ((set.targets.array() - mean) / sd).matrix();
  return set;
}

// Per-parameter gradients, same shapes as MlpParams.
using Gradients = MlpParams<double>;

// Forward activations of one batch kept for the backward pass.
struct ForwardCache {
  RowMatrix<double> pre;      // W_in x + b
  RowMatrix<double> hidden;   // psi(x)
  Vector<double> inv_std;     // per-row 1/sqrt(var + eps)
  RowMatrix<double> outputs;  // W_out psi(x)
};

inline void forward_batch(const MlpParams<double>& p, const RowMatrix<double>& x, ForwardCache& cache) {
  cache.pre.noalias() = x * p.w_in.transpose();
  cache.pre.rowwise() += p.bias.transpose();
  cache.hidden.resize(cache.pre.rows(), cache.pre.cols());
  cache.inv_std.resize(cache.pre.rows());
  for (Eigen::Index r = 0; r < cache.pre.rows(); ++r) {
    for (Eigen::Index c = 0; c < cache.pre.cols(); ++c) cache.hidden(r, c) = gelu(cache.pre(r, c));
    cache.inv_std(r) =
        layer_norm_inplace(std::span<double>(cache.hidden.row(r).data(), static_cast<std::size_t>(cache.hidden.cols())));
  }
  cache.outputs.noalias() = cache.hidden * p.w_out.transpose();
}

// Mean squared error over the batch and all outputs.
inline double mse(const RowMatrix<double>& outputs, const RowMatrix<double>& targets) {
  return (outputs - targets).squaredNorm() / static_cast<double>(outputs.size());
}

// Loss and analytic gradients of the batch MSE.
inline double loss_and_gradients(const MlpParams<double>& p, const RowMatrix<double>& x, const RowMatrix<double>& y,
                                  ForwardCache& cache, Gradients& grad) {
  forward_batch(p, x, cache);
  const double loss = mse(cache.outputs, y);

  const RowMatrix<double> d_out = (cache.outputs - y) * (2.0 / static_cast<double>(y.size()));
  grad.w_out.noalias() = d_out.transpose() * cache.hidden;
  RowMatrix<double> d_hidden = d_out * p.w_out;

  // Layer norm: da = s * (dh - mean(dh) - h * mean(dh * h)).
  const auto width = static_cast<double>(cache.hidden.cols());
  for (Eigen::Index r = 0; r < d_hidden.rows(); ++r) {
    auto dh = d_hidden.row(r);
    const auto h = cache.hidden.row(r);
    const double mean_dh = dh.sum() / width;
    const double mean_dh_h = dh.dot(h) / width;
    for (Eigen::Index c = 0; c < dh.cols(); ++c) {
      dh(c) = cache.inv_std(r) * (dh(c) - mean_dh - h(c) * mean_dh_h) * gelu_grad(cache.pre(r, c));
    }
  }
  grad.w_in.noalias() = d_hidden.transpose() * x;
  grad.bias = d_hidden.colwise().sum().transpose();
  return loss;
}

inline double global_norm(const Gradients& g) {
  return std::sqrt(g.w_in.squaredNorm() + g.bias.squaredNorm() + g.w_out.squaredNorm());
}

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero bias.
inline MlpParams<double> init_params(std::size_t dim, std::size_t d_prime, std::size_t m_out, std::uint64_t seed) {
  Rng rng = make_rng(seed, SeedStream::kInit);
  auto fill = [&rng](RowMatrix<double>& m, std::size_t fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  };
  MlpParams<double> p;
  p.w_in.resize(static_cast<Eigen::Index>(d_prime), static_cast<Eigen::Index>(dim));
  p.w_out.resize(static_cast<Eigen::Index>(m_out), static_cast<Eigen::Index>(d_prime));
  p.bias = Vector<double>::Zero(static_cast<Eigen::Index>(d_prime));
  fill(p.w_in, dim);
  fill(p.w_out, d_prime);
  return p;
}

// Full-set MSE, evaluated in batches to bound memory.
inline double evaluate_mse(const MlpParams<double>& p, const RowMatrix<double>& x, const RowMatrix<double>& y,
                           std::size_t batch = 4096) {
  ForwardCache cache;
  double sum = 0.0;
  for (Eigen::Index r = 0; r < x.rows(); r += static_cast<Eigen::Index>(batch)) {
    const Eigen::Index n = std::min<Eigen::Index>(static_cast<Eigen::Index>(batch), x.rows() - r);
    forward_batch(p, x.middleRows(r, n), cache);
    sum += (cache.outputs - y.middleRows(r, n)).squaredNorm();
  }
  return sum / static_cast<double>(y.size());
}

struct TrainOutcome {
  LemurModel model;               // float32 copy, m_out = m'
  MlpParams<double> params;       // float64 master weights
  std::vector<DocId> target_doc_ids;
  double initial_mse = 0.0;
  double final_mse = 0.0;
  std::vector<double> epoch_mse;  // running mean of batch losses per epoch
};

namespace detail {
struct AdamState {
  Gradients m;
  Gradients v;
  std::size_t step = 0;
};

template <class M>
void adam_update(M& param, const M& grad, M& m, M& v, double lr, double bias1, double bias2) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  m = kBeta1 * m + (1.0 - kBeta1) * grad;
  v = kBeta2 * v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  param.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + kEps);
}
}  // namespace detail

// Adam over shuffled minibatches with global-norm gradient clipping.
// Deterministic given cfg.seed.
inline TrainOutcome train(const TrainingSet& set, const TrainConfig& cfg) {
  if (set.size() == 0) throw ArgumentError("empty training set");
  if (set.targets.rows() != set.inputs.rows()) throw ArgumentError("training inputs and targets disagree on n");
  if (cfg.batch_size == 0 || cfg.epochs == 0 || cfg.d_prime == 0) {
    throw ArgumentError("batch_size, epochs and d_prime must be positive");
  }
  const std::size_t n = set.size();
  const std::size_t batch = std::min(cfg.batch_size, n);
  const auto m_out = static_cast<std::size_t>(set.targets.cols());

  TrainOutcome result;
  result.params = init_params(static_cast<std::size_t>(set.inputs.cols()), cfg.d_prime, m_out, cfg.seed);
  result.target_doc_ids = set.target_doc_ids;
  result.initial_mse = evaluate_mse(result.params, set.inputs, set.targets);
  auto& p = result.params;

  detail::AdamState adam{{RowMatrix<double>::Zero(p.w_in.rows(), p.w_in.cols()), Vector<double>::Zero(p.bias.size()),
                          RowMatrix<double>::Zero(p.w_out.rows(), p.w_out.cols())},
                         {RowMatrix<double>::Zero(p.w_in.rows(), p.w_in.cols()), Vector<double>::Zero(p.bias.size()),
                          RowMatrix<double>::Zero(p.w_out.rows(), p.w_out.cols())}};

  Rng rng = make_rng(cfg.seed, SeedStream::kShuffle);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  RowMatrix<double> xb;
  RowMatrix<double> yb;
  ForwardCache cache;
  Gradients grad;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_sum = 0.0;
    std::size_t step_in_epoch = 0;
    for (std::size_t start = 0; start < n; start += batch, ++step_in_epoch) {
      const std::size_t count = std::min(batch, n - start);
      xb.resize(static_cast<Eigen::Index>(count), set.inputs.cols());
      yb.resize(static_cast<Eigen::Index>(count), set.targets.cols());
      for (std::size_t i = 0; i < count; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = set.inputs.row(order[start + i]);
        yb.row(static_cast<Eigen::Index>(i)) = set.targets.row(order[start + i]);
      }
      const double loss = loss_and_gradients(p, xb, yb, cache, grad);
      const double norm = global_norm(grad);
      if (!std::isfinite(loss) || !std::isfinite(norm)) {
        throw TrainingDivergenceError(epoch, step_in_epoch,
                                      "training diverged (non-finite loss) at epoch " + std::to_string(epoch) +
                                          ", step " + std::to_string(step_in_epoch));
      }
      epoch_sum += loss * static_cast<double>(count);
      if (norm > cfg.grad_clip) {
        const double s = cfg.grad_clip / norm;
        grad.w_in *= s;
        grad.bias *= s;
        grad.w_out *= s;
      }
      ++adam.step;
      const double bias1 = 1.0 - std::pow(0.9, static_cast<double>(adam.step));
      const double bias2 = 1.0 - std::pow(0.999, static_cast<double>(adam.step));
      detail::adam_update(p.w_in, grad.w_in, adam.m.w_in, adam.v.w_in, cfg.lr, bias1, bias2);
      detail::adam_update(p.bias, grad.bias, adam.m.bias, adam.v.bias, cfg.lr, bias1, bias2);
      detail::adam_update(p.w_out, grad.w_out, adam.m.w_out, adam.v.w_out, cfg.lr, bias1, bias2);
    }
    result.epoch_mse.push_back(epoch_sum / static_cast<double>(n));
  }

  result.final_mse = evaluate_mse(p, set.inputs, set.targets);
  result.model.params = p.cast<float>();
  result.model.target_mean = set.target_mean;
  result.model.target_std = set.target_std;
  return result;
}

struct GradientCheckResult {
  double max_relative_error = 0.0;
  Gradients analytic;
};

// Central finite differences of the batch MSE against every analytic
// gradient entry. Relative error is |a - n| / max(|a|, |n|, 1e-6) so that
// near-zero gradients are judged on absolute error.
inline GradientCheckResult gradient_check(const MlpParams<double>& params, const RowMatrix<double>& x,
                                          const RowMatrix<double>& y, double h = 1e-6) {
  GradientCheckResult result;
  ForwardCache cache;
  loss_and_gradients(params, x, y, cache, result.analytic);

  MlpParams<double> probe = params;
  auto loss_at = [&]() {
    forward_batch(probe, x, cache);
    return mse(cache.outputs, y);
  };
  auto check = [&](auto& values, const auto& analytic) {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      const double saved = values.data()[i];
      values.data()[i] = saved + h;
      const double up = loss_at();
      values.data()[i] = saved - h;
      const double down = loss_at();
      values.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      result.max_relative_error = std::max(result.max_relative_error, std::abs(a - numeric) / denom);
    }
  };
  check(probe.w_in, result.analytic.w_in);
  check(probe.bias, result.analytic.bias);
  check(probe.w_out, result.analytic.w_out);
  return result;
}

// Random small instance: d = dim, d' = cfg.d_prime, m' = cfg.m_prime, and a
// batch of min(cfg.batch_size, 16) rows, with a nonzero bias so every GELU
// regime is exercised.
inline double gradient_check(const TrainConfig& cfg, std::size_t dim, std::uint64_t seed) {
  if (dim > 16 || cfg.d_prime > 32 || cfg.m_prime > 8) {
    throw ArgumentError("gradient_check is limited to d <= 16, d' <= 32, m' <= 8");
  }
  MlpParams<double> p = init_params(dim, cfg.d_prime, cfg.m_prime, seed);
  Rng rng = make_rng(seed, SeedStream::kProbe);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < p.bias.size(); ++i) p.bias(i) = 0.5 * normal(rng);
  const auto rows = static_cast<Eigen::Index>(std::min<std::size_t>(cfg.batch_size, 16));
  RowMatrix<double> x(rows, static_cast<Eigen::Index>(dim));
  RowMatrix<double> y(rows, static_cast<Eigen::Index>(cfg.m_prime));
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (Eigen::Index i = 0; i < y.size(); ++i) y.data()[i] = normal(rng);
  return gradient_check(p, x, y).max_relative_error;
}

}  // namespace lemur
