#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cstdint>
#include <iostream>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lemur/corpus.hpp"
#include "lemur/error.hpp"
#include "lemur/model.hpp"
#include "lemur/parallel.hpp"
#include "lemur/targets.hpp"

namespace lemur {

struct OlsConfig {
  std::size_t n_prime = 16384;
  double ridge_eps = 1e-6;
  std::uint64_t seed = 42;
  std::size_t threads = 1;
  std::size_t doc_block = 1024;  // documents solved per batched right-hand side
};

// Least-squares solver for many right-hand sides sharing one design matrix
// Phi (n' x d'). G = Phi^T Phi + eps I is factorized once (Cholesky) and
// reused for every document.
class OlsSolver {
 public:
  OlsSolver(RowMatrix<double> design, double ridge_eps) : design_(std::move(design)), ridge_eps_(ridge_eps) {
    if (ridge_eps < 0.0) throw ArgumentError("ridge_eps must be >= 0");
    if (design_.rows() < design_.cols()) {
      std::cerr << "warning: OLS design has " << design_.rows() << " rows for " << design_.cols()
                << " features; relying on ridge_eps=" << ridge_eps << "\n";
    }
    Eigen::MatrixXd gram = design_.transpose() * design_;
    gram.diagonal().array() += ridge_eps;
    llt_.compute(gram);
    if (llt_.info() != Eigen::Success || !(llt_.rcond() > 1e-14)) {
      throw NumericalError("OLS Gram matrix is singular or indefinite (ridge_eps=" + std::to_string(ridge_eps) +
                           "); use ridge_eps > 0 or more OLS tokens");
    }
  }

  const RowMatrix<double>& design() const { return design_; }
  double ridge_eps() const { return ridge_eps_; }

  // Solves for every column of `targets` (n' x B); returns B x d', one row per column.
  RowMatrix<double> solve(const RowMatrix<double>& targets) const {
    if (targets.rows() != design_.rows()) throw ArgumentError("OLS targets have the wrong number of rows");
    const Eigen::MatrixXd rhs = design_.transpose() * targets;
    return llt_.solve(rhs).transpose();
  }

  // ||(Phi^T Phi + eps I) w - Phi^T y|| / ||Phi^T y|| for one solution row.
  double relative_residual(const Vector<double>& w, const Vector<double>& y) const {
    const Vector<double> rhs = design_.transpose() * y;
    const Vector<double> lhs = design_.transpose() * (design_ * w) + ridge_eps_ * w;
    const double scale = rhs.norm();
    return scale > 0.0 ? (lhs - rhs).norm() / scale : (lhs - rhs).norm();
  }

 private:
  RowMatrix<double> design_;
  double ridge_eps_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

// Phi = [psi(x_i)] in float64 for the frozen encoder.
inline RowMatrix<double> encoder_design(const LemurModel& model, TokenView tokens) {
  return encode_rows<double>(model.params, to_matrix<double>(tokens));
}

// OLS rows (float64) for `doc_ids` against standardized targets, using the
// encoder and (mu, sigma) of `model`. Row r of the result belongs to doc_ids[r].
inline RowMatrix<double> fit_head_rows(const LemurModel& model, const Corpus& corpus, TokenView tokens,
                                       std::span<const DocId> doc_ids, const OlsConfig& cfg) {
  const OlsSolver solver(encoder_design(model, tokens), cfg.ridge_eps);
  const TargetMatrixBuilder targets(corpus, tokens);
  RowMatrix<double> rows(static_cast<Eigen::Index>(doc_ids.size()), static_cast<Eigen::Index>(model.d_prime()));
  const std::size_t block = std::max<std::size_t>(1, cfg.doc_block);
  const std::size_t blocks = (doc_ids.size() + block - 1) / block;
  parallel_for(blocks, cfg.threads, [&](std::size_t b) {
    const std::size_t first = b * block;
    const std::size_t count = std::min(block, doc_ids.size() - first);
    RowMatrix<double> y;
    targets.fill(doc_ids.subspan(first, count), y, model.target_mean, 1.0 / model.target_std);
    rows.middleRows(static_cast<Eigen::Index>(first), static_cast<Eigen::Index>(count)) = solver.solve(y);
  });
  return rows;
}

// Phase two: freeze the encoder of a phase-one model and fit one output row
// per corpus document by closed-form least squares. Keeps phase-one mu and
// sigma so both heads share one scale.
inline LemurModel fit_full_head(const LemurModel& encoder_model, const Corpus& corpus, TokenView tokens,
                                const OlsConfig& cfg) {
  if (tokens.dim() != encoder_model.dim()) throw ArgumentError("OLS tokens do not match the model dimension");
  if (tokens.empty()) throw ArgumentError("OLS needs at least one token");
  std::vector<DocId> all(corpus.size());
  for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<DocId>(j);
  LemurModel out;
  out.params.w_in = encoder_model.params.w_in;
  out.params.bias = encoder_model.params.bias;
  out.target_mean = encoder_model.target_mean;
  out.target_std = encoder_model.target_std;
  out.params.w_out = fit_head_rows(encoder_model, corpus, tokens, all, cfg).cast<float>();
  return out;
}

struct HeadAgreement {
  std::vector<double> ols_mse;
  std::vector<double> phase1_mse;
};

// Compares OLS rows (fit on `fit_tokens`) with the gradient-trained phase-one
// rows on `eval_tokens`, per document. `phase1_ids` lists the document of
// each phase-one head row; every entry of `doc_ids` must appear there.
inline HeadAgreement head_agreement(const LemurModel& phase1, std::span<const DocId> phase1_ids,
                                    std::span<const DocId> doc_ids, const Corpus& corpus, TokenView fit_tokens,
                                    TokenView eval_tokens, const OlsConfig& cfg) {
  std::unordered_map<DocId, Eigen::Index> row_of;
  for (std::size_t r = 0; r < phase1_ids.size(); ++r) row_of[phase1_ids[r]] = static_cast<Eigen::Index>(r);
  for (DocId id : doc_ids) {
    if (!row_of.contains(id)) throw ArgumentError("doc " + std::to_string(id) + " has no phase-one head row");
  }
  const RowMatrix<double> ols_rows = fit_head_rows(phase1, corpus, fit_tokens, doc_ids, cfg);
  const RowMatrix<double> phi = encoder_design(phase1, eval_tokens);
  RowMatrix<double> y;
  TargetMatrixBuilder(corpus, eval_tokens).fill(doc_ids, y, phase1.target_mean, 1.0 / phase1.target_std);

  HeadAgreement out;
  const auto n = static_cast<double>(phi.rows());
  for (std::size_t i = 0; i < doc_ids.size(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const Vector<double> w1 = phase1.params.w_out.row(row_of[doc_ids[i]]).cast<double>().transpose();
    const Vector<double> w2 = ols_rows.row(col).transpose();
    out.ols_mse.push_back((phi * w2 - y.col(col)).squaredNorm() / n);
    out.phase1_mse.push_back((phi * w1 - y.col(col)).squaredNorm() / n);
  }
  return out;
}

}  // namespace lemur
