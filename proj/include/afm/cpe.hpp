#pragma once

#include <utility>
#include <vector>

#include "afm/core.hpp"

namespace afm {

// Logistic model of p(y >= tau | x) over per-position one-hot features
// plus a bias. Outputs are clamped strictly inside (0, 1).
class ClassProbabilityEstimator {
 public:
  ClassProbabilityEstimator(Vocab vocab, int length);

  double predict(const Sequence& x) const;  // std::domain_error on mask tokens
  Eigen::VectorXd features(const Sequence& x) const;

  int length() const { return length_; }
  const Vocab& vocab() const { return vocab_; }
  int feature_dim() const { return length_ * vocab_.size() + 1; }

  Eigen::VectorXd weights;  // one-hot weights then bias

 private:
  Vocab vocab_;
  int length_;
};

enum class ThresholdKind { Percentile, Ladder };

struct ThresholdSchedule {
  ThresholdKind kind = ThresholdKind::Percentile;
  double percentile = 90.0;                      // in (0, 100)
  std::vector<std::pair<int, double>> ladder;    // (round, tau), non-decreasing
};

// Percentile kind: nearest-rank percentile of the observed labels. Ladder
// kind: value of the latest step at or before the round.
double threshold(const ThresholdSchedule& schedule, int round,
                 const std::vector<double>& labels);

using LabelledData = std::vector<std::pair<Sequence, double>>;

struct CpeFitOptions {
  int epochs = 300;
  double learning_rate = 0.3;
};

// Class-reweighted logistic log loss (positive-class weight =
// negatives/positives), normalised by the total example weight.
double cpe_class_loss(const ClassProbabilityEstimator& model, const LabelledData& data,
                      double tau, bool class_reweighted);
Eigen::VectorXd cpe_class_grad(const ClassProbabilityEstimator& model,
                               const LabelledData& data, double tau,
                               bool class_reweighted, double* loss_out = nullptr);

// Full-batch gradient descent from zero weights. A single-class dataset
// yields a constant model at the class prior clipped to [0.01, 0.99].
ClassProbabilityEstimator cpe_fit(const LabelledData& data, double tau, const Vocab& vocab,
                                  int length, const CpeFitOptions& options = {});

}  // namespace afm
