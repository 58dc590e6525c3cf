#include "afm/denoiser.hpp"

#include <cmath>

namespace afm {

Eigen::MatrixXd Denoiser::predict_batch(const std::vector<Sequence>& states,
                                        double t) const {
  const int L = length();
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(states.size()) * L, vocab().size());
  for (std::size_t k = 0; k < states.size(); ++k)
    stacked.middleRows(static_cast<Eigen::Index>(k) * L, L) = predict(states[k], t);
  return stacked;
}

TabularDenoiser::TabularDenoiser(Vocab vocab, int length)
    : vocab_(vocab), length_(length) {
  if (length < 1) throw ConfigError("tabular denoiser needs length >= 1");
  const std::size_t contexts = pow_checked(vocab_.slots(), length_, kMaxContexts);
  table_.assign(contexts, Eigen::MatrixXd());
}

Eigen::MatrixXd TabularDenoiser::predict(const Sequence& xt, double) const {
  if (static_cast<int>(xt.size()) != length_)
    throw ShapeError("tabular predict: state length mismatch");
  check_tokens(vocab_, xt);
  const std::size_t index = sequence_index(xt, vocab_.slots());
  if (table_[index].size() == 0) {
    log_warn("tabular denoiser queried at unseen context " + format_tokens(xt) +
             "; returning uniform rows");
    return Eigen::MatrixXd::Constant(length_, vocab_.size(), 1.0 / vocab_.size());
  }
  return table_[index];
}

void TabularDenoiser::set_context(const Sequence& context, Eigen::MatrixXd rows) {
  if (static_cast<int>(context.size()) != length_)
    throw ShapeError("tabular set_context: length mismatch");
  if (rows.rows() != length_ || rows.cols() != vocab_.size())
    throw ShapeError("tabular set_context: row block shape mismatch");
  for (int i = 0; i < length_; ++i) {
    const double sum = rows.row(i).sum();
    if (rows.row(i).minCoeff() < -1e-12 || std::abs(sum - 1.0) > 1e-10)
      throw NumericalError("tabular row is not a probability vector");
  }
  table_[sequence_index(context, vocab_.slots())] = std::move(rows);
}

const Eigen::MatrixXd& TabularDenoiser::row_block(std::size_t context_index) const {
  return table_.at(context_index);
}

bool TabularDenoiser::has_context(std::size_t context_index) const {
  return table_.at(context_index).size() != 0;
}

SoftmaxDenoiser::SoftmaxDenoiser(Vocab vocab, int length, Scheduler scheduler)
    : vocab_(vocab), length_(length), scheduler_(scheduler) {
  if (length < 1) throw ConfigError("softmax denoiser needs length >= 1");
  feature_dim_ = length_ * vocab_.slots() + 3;
  weights = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(length_) * vocab_.size(),
                                  feature_dim_);
}

Eigen::VectorXd SoftmaxDenoiser::features(const Sequence& xt, double t) const {
  if (static_cast<int>(xt.size()) != length_)
    throw ShapeError("softmax features: state length mismatch");
  check_tokens(vocab_, xt);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(feature_dim_);
  const int slots = vocab_.slots();
  for (int i = 0; i < length_; ++i) f[i * slots + xt[static_cast<std::size_t>(i)]] = 1.0;
  f[feature_dim_ - 3] = t;
  f[feature_dim_ - 2] = 1.0 - t;
  f[feature_dim_ - 1] = kappa(scheduler_, t).kappa;
  return f;
}

Eigen::MatrixXd SoftmaxDenoiser::feature_matrix(const std::vector<Sequence>& states,
                                                const std::vector<double>& times) const {
  if (states.size() != times.size())
    throw ShapeError("feature_matrix: states/times length mismatch");
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(states.size()), feature_dim_);
  for (std::size_t k = 0; k < states.size(); ++k)
    phi.row(static_cast<Eigen::Index>(k)) = features(states[k], times[k]).transpose();
  return phi;
}

Eigen::MatrixXd SoftmaxDenoiser::softmax_rows(const Eigen::MatrixXd& logits) const {
  Eigen::MatrixXd rows = logits;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double shift = rows.row(i).maxCoeff();
    rows.row(i) = (rows.row(i).array() - shift).exp();
    rows.row(i) /= rows.row(i).sum();
  }
  return rows;
}

Eigen::MatrixXd SoftmaxDenoiser::predict(const Sequence& xt, double t) const {
  const Eigen::VectorXd f = features(xt, t);
  Eigen::MatrixXd logits(length_, vocab_.size());
  Eigen::VectorXd flat = weights * f;
  for (int i = 0; i < length_; ++i)
    logits.row(i) = flat.segment(static_cast<Eigen::Index>(i) * vocab_.size(),
                                 vocab_.size());
  return softmax_rows(logits);
}

Eigen::MatrixXd SoftmaxDenoiser::predict_batch(const std::vector<Sequence>& states,
                                               double t) const {
  std::vector<double> times(states.size(), t);
  const Eigen::MatrixXd phi = feature_matrix(states, times);
  const Eigen::MatrixXd flat = phi * weights.transpose();  // n x (L*V)
  const int V = vocab_.size();
  Eigen::MatrixXd stacked(static_cast<Eigen::Index>(states.size()) * length_, V);
  for (std::size_t k = 0; k < states.size(); ++k) {
    Eigen::MatrixXd logits(length_, V);
    for (int i = 0; i < length_; ++i)
      logits.row(i) = flat.row(static_cast<Eigen::Index>(k))
                          .segment(static_cast<Eigen::Index>(i) * V, V);
    stacked.middleRows(static_cast<Eigen::Index>(k) * length_, length_) =
        softmax_rows(logits);
  }
  return stacked;
}

double ce_loss(const Denoiser& model, const Sequence& x1, const Sequence& xt, double t) {
  if (contains_mask(model.vocab(), x1))
    throw ShapeError("ce_loss target contains a mask token");
  const Eigen::MatrixXd rows = model.predict(xt, t);
  double loss = 0.0;
  for (int i = 0; i < model.length(); ++i) {
    double p = rows(i, x1[static_cast<std::size_t>(i)]);
    if (p < kLogClamp) {
      log_warn("ce_loss: clamping near-zero predicted probability");
      p = kLogClamp;
    }
    loss -= std::log(p);
  }
  return loss;
}

double weighted_ce_loss(const Denoiser& model, const TrainBatch& batch) {
  if (batch.targets.size() != batch.states.size() ||
      batch.targets.size() != batch.times.size() ||
      static_cast<Eigen::Index>(batch.targets.size()) != batch.weights.size())
    throw ShapeError("weighted_ce_loss: ragged batch");
  double loss = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k)
    loss += batch.weights[static_cast<Eigen::Index>(k)] *
            ce_loss(model, batch.targets[k], batch.states[k], batch.times[k]);
  return loss;
}

Eigen::MatrixXd weighted_ce_grad(const SoftmaxDenoiser& model, const TrainBatch& batch,
                                 double* loss_out) {
  const int L = model.length();
  const int V = model.vocab().size();
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());
  const Eigen::MatrixXd phi = model.feature_matrix(batch.states, batch.times);
  const Eigen::MatrixXd flat = phi * model.weights.transpose();  // n x (L*V)

  Eigen::MatrixXd dz = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(L) * V);
  double loss = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    const double w = batch.weights[k];
    const Sequence& x1 = batch.targets[static_cast<std::size_t>(k)];
    for (int i = 0; i < L; ++i) {
      Eigen::RowVectorXd logits = flat.row(k).segment(static_cast<Eigen::Index>(i) * V, V);
      const double shift = logits.maxCoeff();
      Eigen::RowVectorXd p = (logits.array() - shift).exp();
      p /= p.sum();
      const int target = x1[static_cast<std::size_t>(i)];
      loss -= w * std::log(std::max(p[target], kLogClamp));
      dz.row(k).segment(static_cast<Eigen::Index>(i) * V, V) = w * p;
      dz(k, static_cast<Eigen::Index>(i) * V + target) -= w;
    }
  }
  if (loss_out) *loss_out = loss;
  return dz.transpose() * phi;  // (L*V) x F
}

double train_step(SoftmaxDenoiser& model, const TrainBatch& batch, double learning_rate) {
  if (learning_rate < 0.0) throw ConfigError("train_step needs learning_rate >= 0");
  double loss = 0.0;
  const Eigen::MatrixXd grad = weighted_ce_grad(model, batch, &loss);
  if (!grad.allFinite())
    throw NumericalError("non-finite gradient on a batch of " +
                         std::to_string(batch.size()) + " examples, loss " +
                         std::to_string(loss));
  model.weights -= learning_rate * grad;
  return loss;
}

TabularDenoiser fit_tabular_exact(const WeightedData& weighted_targets,
                                  const Vocab& vocab, int length) {
  if (!vocab.has_mask())
    throw ConfigError("exact tabular fit is defined for mask-source paths only");
  if (weighted_targets.empty())
    throw ConfigError("exact tabular fit needs a non-empty dataset");
  double total = 0.0;
  for (const auto& [x1, w] : weighted_targets) {
    if (static_cast<int>(x1.size()) != length)
      throw ShapeError("exact tabular fit: target length mismatch");
    if (contains_mask(vocab, x1))
      throw ShapeError("exact tabular fit: target contains a mask token");
    if (w < 0.0) throw ConfigError("exact tabular fit: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("exact tabular fit: all weights zero");

  TabularDenoiser model(vocab, length);
  const int slots = vocab.slots();
  const std::size_t contexts = pow_checked(slots, length, TabularDenoiser::kMaxContexts);
  const int V = vocab.size();
  std::size_t empty_contexts = 0;
  for (std::size_t index = 0; index < contexts; ++index) {
    const Sequence context = index_sequence(index, length, slots);
    Eigen::MatrixXd counts = Eigen::MatrixXd::Zero(length, V);
    double mass = 0.0;
    for (const auto& [x1, w] : weighted_targets) {
      if (w == 0.0) continue;
      bool agrees = true;
      for (int i = 0; i < length && agrees; ++i) {
        const int c = context[static_cast<std::size_t>(i)];
        agrees = vocab.is_mask(c) || c == x1[static_cast<std::size_t>(i)];
      }
      if (!agrees) continue;
      mass += w;
      for (int i = 0; i < length; ++i)
        counts(i, x1[static_cast<std::size_t>(i)]) += w;
    }
    Eigen::MatrixXd rows;
    if (mass > 0.0) {
      rows = counts / mass;
    } else {
      ++empty_contexts;
      rows = Eigen::MatrixXd::Constant(length, V, 1.0 / V);
    }
    model.set_context(context, std::move(rows));
  }
  if (empty_contexts > 0)
    log_warn("fit_tabular_exact: " + std::to_string(empty_contexts) +
             " contexts with zero consistent mass set to uniform rows");
  return model;
}

}  // namespace afm
