#include "afm/cpe.hpp"

#include <algorithm>
#include <cmath>

namespace afm {

namespace {

constexpr double kProbClamp = 1e-12;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double clamp_prob(double p) {
  return std::min(std::max(p, kProbClamp), 1.0 - kProbClamp);
}

}  // namespace

ClassProbabilityEstimator::ClassProbabilityEstimator(Vocab vocab, int length)
    : vocab_(vocab), length_(length) {
  if (length < 1) throw ConfigError("classifier needs length >= 1");
  weights = Eigen::VectorXd::Zero(feature_dim());
}

Eigen::VectorXd ClassProbabilityEstimator::features(const Sequence& x) const {
  if (static_cast<int>(x.size()) != length_)
    throw ShapeError("classifier features: length mismatch");
  if (contains_mask(vocab_, x))
    throw std::domain_error("classifier input contains a mask token");
  check_tokens(vocab_, x);
  Eigen::VectorXd f = Eigen::VectorXd::Zero(feature_dim());
  for (int i = 0; i < length_; ++i)
    f[i * vocab_.size() + x[static_cast<std::size_t>(i)]] = 1.0;
  f[feature_dim() - 1] = 1.0;
  return f;
}

double ClassProbabilityEstimator::predict(const Sequence& x) const {
  return clamp_prob(sigmoid(weights.dot(features(x))));
}

double threshold(const ThresholdSchedule& schedule, int round,
                 const std::vector<double>& labels) {
  if (schedule.kind == ThresholdKind::Percentile) {
    if (labels.empty())
      throw ConfigError("percentile threshold over an empty dataset");
    if (!(schedule.percentile > 0.0 && schedule.percentile < 100.0))
      throw ConfigError("percentile must lie in (0, 100)");
    std::vector<double> sorted = labels;
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    std::size_t rank = static_cast<std::size_t>(
        std::ceil(schedule.percentile / 100.0 * static_cast<double>(n)));
    rank = std::max<std::size_t>(rank, 1);
    return sorted[std::min(rank, n) - 1];
  }
  if (schedule.ladder.empty()) throw ConfigError("empty threshold ladder");
  double value = schedule.ladder.front().second;
  for (const auto& [step_round, tau] : schedule.ladder)
    if (step_round <= round) value = tau;
  return value;
}

Eigen::VectorXd cpe_class_grad(const ClassProbabilityEstimator& model,
                               const LabelledData& data, double tau,
                               bool class_reweighted, double* loss_out) {
  std::size_t positives = 0;
  for (const auto& [x, y] : data) positives += y >= tau;
  const std::size_t negatives = data.size() - positives;
  const double positive_weight =
      class_reweighted && positives > 0
          ? static_cast<double>(negatives) / static_cast<double>(positives)
          : 1.0;

  Eigen::VectorXd grad = Eigen::VectorXd::Zero(model.weights.size());
  double loss = 0.0;
  double total_weight = 0.0;
  for (const auto& [x, y] : data) {
    const bool z = y >= tau;
    const double c = z ? positive_weight : 1.0;
    const Eigen::VectorXd f = model.features(x);
    const double p = sigmoid(model.weights.dot(f));
    loss -= c * std::log(clamp_prob(z ? p : 1.0 - p));
    grad += c * (p - (z ? 1.0 : 0.0)) * f;
    total_weight += c;
  }
  if (total_weight > 0.0) {
    loss /= total_weight;
    grad /= total_weight;
  }
  if (loss_out) *loss_out = loss;
  return grad;
}

double cpe_class_loss(const ClassProbabilityEstimator& model, const LabelledData& data,
                      double tau, bool class_reweighted) {
  double loss = 0.0;
  cpe_class_grad(model, data, tau, class_reweighted, &loss);
  return loss;
}

ClassProbabilityEstimator cpe_fit(const LabelledData& data, double tau, const Vocab& vocab,
                                  int length, const CpeFitOptions& options) {
  if (data.empty()) throw ConfigError("classifier fit over an empty dataset");
  ClassProbabilityEstimator model(vocab, length);

  std::size_t positives = 0;
  for (const auto& [x, y] : data) positives += y >= tau;
  if (positives == 0 || positives == data.size()) {
    const double prior = static_cast<double>(positives) / static_cast<double>(data.size());
    const double clipped = std::min(std::max(prior, 0.01), 0.99);
    log_warn("cpe_fit: single-class dataset, constant model at " +
             std::to_string(clipped));
    model.weights[model.feature_dim() - 1] = std::log(clipped / (1.0 - clipped));
    return model;
  }

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const Eigen::VectorXd grad = cpe_class_grad(model, data, tau, true);
    model.weights -= options.learning_rate * grad;
  }
  return model;
}

}  // namespace afm
