#pragma once

#include <utility>
#include <vector>

#include "afm/core.hpp"
#include "afm/flow_path.hpp"
#include "afm/scheduler.hpp"

namespace afm {

// Conditional endpoint model: given a partially corrupted state x_t and a
// time t, predicts per-position distributions of the clean target over the
// data tokens.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual int length() const = 0;
  virtual const Vocab& vocab() const = 0;
  // One row per position, each a probability vector over data tokens.
  virtual Eigen::MatrixXd predict(const Sequence& xt, double t) const = 0;
  // Stacked rows for a batch of states; block k*L..k*L+L-1 belongs to
  // state k. The default loops; implementations may batch.
  virtual Eigen::MatrixXd predict_batch(const std::vector<Sequence>& states,
                                        double t) const;
};

// Exact lookup model over the full context space (slots^L contexts). Rows
// do not depend on t: under a mask source the path likelihood factors into
// a mask-count constant times an agreement indicator, so the posterior is
// time-independent and the table is keyed by context alone.
class TabularDenoiser : public Denoiser {
 public:
  static constexpr std::size_t kMaxContexts = 10000;

  TabularDenoiser(Vocab vocab, int length);

  int length() const override { return length_; }
  const Vocab& vocab() const override { return vocab_; }
  Eigen::MatrixXd predict(const Sequence& xt, double t) const override;

  void set_context(const Sequence& context, Eigen::MatrixXd rows);
  std::size_t context_count() const { return table_.size(); }
  const Eigen::MatrixXd& row_block(std::size_t context_index) const;
  bool has_context(std::size_t context_index) const;

 private:
  Vocab vocab_;
  int length_;
  std::vector<Eigen::MatrixXd> table_;  // context rank -> L x |V|; empty = unseen
};

// Linear-softmax model: per-position one-hot of the state concatenated
// with the time features (t, 1-t, kappa(t)) mapped to per-position logits.
class SoftmaxDenoiser : public Denoiser {
 public:
  SoftmaxDenoiser(Vocab vocab, int length, Scheduler scheduler);

  int length() const override { return length_; }
  const Vocab& vocab() const override { return vocab_; }
  Eigen::MatrixXd predict(const Sequence& xt, double t) const override;
  Eigen::MatrixXd predict_batch(const std::vector<Sequence>& states,
                                double t) const override;

  int feature_dim() const { return feature_dim_; }
  Eigen::VectorXd features(const Sequence& xt, double t) const;
  Eigen::MatrixXd feature_matrix(const std::vector<Sequence>& states,
                                 const std::vector<double>& times) const;
  const Scheduler& scheduler() const { return scheduler_; }

  // (L * |V|) x feature_dim; row i*|V|+v drives the logit of token v at
  // position i.
  Eigen::MatrixXd weights;

 private:
  Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) const;

  Vocab vocab_;
  int length_;
  Scheduler scheduler_;
  int feature_dim_;
};

// Parallel arrays of targets, corrupted states, times and normalised
// weights; the unit of work for weighted cross-entropy training.
struct TrainBatch {
  std::vector<Sequence> targets;
  std::vector<Sequence> states;
  std::vector<double> times;
  Eigen::VectorXd weights;

  std::size_t size() const { return targets.size(); }
};

// Negative log-likelihood of the clean target under the model prediction,
// summed over positions. Probabilities are floored at kLogClamp before log.
inline constexpr double kLogClamp = 1e-12;
double ce_loss(const Denoiser& model, const Sequence& x1, const Sequence& xt, double t);

double weighted_ce_loss(const Denoiser& model, const TrainBatch& batch);

// Analytic gradient of weighted_ce_loss w.r.t. the softmax weights.
Eigen::MatrixXd weighted_ce_grad(const SoftmaxDenoiser& model, const TrainBatch& batch,
                                 double* loss_out = nullptr);

// One gradient-descent step on weighted_ce_loss; returns the pre-step loss.
double train_step(SoftmaxDenoiser& model, const TrainBatch& batch, double learning_rate);

using WeightedData = std::vector<std::pair<Sequence, double>>;

// Global minimiser of the weighted CE objective for mask-source convex
// paths: every context row is the exact conditional of the weighted
// empirical target law given agreement on the context's unmasked positions.
TabularDenoiser fit_tabular_exact(const WeightedData& weighted_targets,
                                  const Vocab& vocab, int length);

}  // namespace afm
