#include "afm/exact_oracle.hpp"

#include <cmath>

namespace afm {

namespace {
constexpr std::size_t kMaxStates = 10000;
constexpr double kMassTolerance = 1e-10;
}  // namespace

TargetDistribution target_distribution(const WeightFn& weight_fn, const Vocab& vocab,
                                       int length) {
  const std::size_t count = pow_checked(vocab.size(), length, kMaxStates);
  Eigen::VectorXd w(static_cast<Eigen::Index>(count));
  for (std::size_t index = 0; index < count; ++index)
    w[static_cast<Eigen::Index>(index)] =
        weight_fn(index_sequence(index, length, vocab.size()));
  if (w.minCoeff() < 0.0) throw NumericalError("target weight function went negative");
  const double sum = w.sum();
  if (!(sum > 0.0)) throw DegenerateBatchError("target weights are all zero");
  return {DistributionTable{length, vocab.size(), w / sum},
          sum / static_cast<double>(count)};
}

DistributionTable enumerate_terminal(const Denoiser& model, const SourceDistribution& source,
                                     const Scheduler& scheduler, int steps,
                                     bool force_terminal_unmask) {
  if (steps < 1 || steps > 64)
    throw ConfigError("enumerate_terminal supports 1..64 steps");
  const Vocab& vocab = model.vocab();
  const int L = model.length();
  const int slots = vocab.slots();
  const int V = vocab.size();
  const std::size_t states = pow_checked(slots, L, kMaxStates);
  const double h = 1.0 / steps;

  Eigen::VectorXd dist = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(states));
  if (source.kind == SourceKind::Mask) {
    const Sequence all_mask(static_cast<std::size_t>(L), vocab.mask_token());
    dist[static_cast<Eigen::Index>(sequence_index(all_mask, slots))] = 1.0;
  } else {
    const std::size_t data_states = pow_checked(V, L, kMaxStates);
    const double p = 1.0 / static_cast<double>(data_states);
    for (std::size_t index = 0; index < data_states; ++index) {
      const Sequence x = index_sequence(index, L, V);
      dist[static_cast<Eigen::Index>(sequence_index(x, slots))] = p;
    }
  }

  // Per-state product kernel, expanded over all joint successors in rank
  // order (position 0 is the most significant digit).
  for (int step = 0; step < steps; ++step) {
    const double t = step * h;
    Eigen::VectorXd next = Eigen::VectorXd::Zero(dist.size());
    for (std::size_t index = 0; index < states; ++index) {
      const double mass = dist[static_cast<Eigen::Index>(index)];
      if (mass == 0.0) continue;
      const Sequence x = index_sequence(index, L, slots);
      const Eigen::MatrixXd rows =
          velocity(model.predict(x, t), x, t, scheduler, vocab);
      Eigen::MatrixXd kernels(L, slots);
      for (int i = 0; i < L; ++i)
        kernels.row(i) =
            transition_kernel(rows.row(i), x[static_cast<std::size_t>(i)], h).transpose();
      Sequence successor(static_cast<std::size_t>(L), 0);
      for (std::size_t succ = 0; succ < states; ++succ) {
        double p = mass;
        for (int i = 0; i < L && p != 0.0; ++i)
          p *= kernels(i, successor[static_cast<std::size_t>(i)]);
        if (p != 0.0) next[static_cast<Eigen::Index>(succ)] += p;
        for (int i = L - 1; i >= 0; --i) {
          if (++successor[static_cast<std::size_t>(i)] < slots) break;
          successor[static_cast<std::size_t>(i)] = 0;
        }
      }
    }
    dist.swap(next);
  }

  if (std::abs(dist.sum() - 1.0) > kMassTolerance)
    throw NumericalError("enumerated law lost probability mass");

  if (!force_terminal_unmask || !vocab.has_mask())
    return {L, slots, dist};

  // Terminal unmasking as a final kernel: masked positions resampled from
  // the denoiser at the final state, evaluated at the last grid time.
  const double t_final = 1.0 - h;
  const std::size_t data_states = pow_checked(V, L, kMaxStates);
  Eigen::VectorXd unmasked = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data_states));
  for (std::size_t index = 0; index < states; ++index) {
    const double mass = dist[static_cast<Eigen::Index>(index)];
    if (mass == 0.0) continue;
    const Sequence x = index_sequence(index, L, slots);
    if (!contains_mask(vocab, x)) {
      unmasked[static_cast<Eigen::Index>(sequence_index(x, V))] += mass;
      continue;
    }
    const Eigen::MatrixXd rows = model.predict(x, t_final);
    std::vector<int> masked;
    for (int i = 0; i < L; ++i)
      if (vocab.is_mask(x[static_cast<std::size_t>(i)])) masked.push_back(i);
    const std::size_t fills = pow_checked(V, static_cast<int>(masked.size()), kMaxStates);
    Sequence filled = x;
    for (std::size_t fill = 0; fill < fills; ++fill) {
      const Sequence choice = index_sequence(fill, static_cast<int>(masked.size()), V);
      double p = mass;
      for (std::size_t j = 0; j < masked.size(); ++j) {
        filled[static_cast<std::size_t>(masked[j])] = choice[j];
        p *= rows(masked[j], choice[j]);
      }
      if (p > 0.0)
        unmasked[static_cast<Eigen::Index>(sequence_index(filled, V))] += p;
    }
  }
  if (std::abs(unmasked.sum() - 1.0) > kMassTolerance)
    throw NumericalError("terminal unmasking lost probability mass");
  return {L, V, unmasked};
}

double total_variation(const DistributionTable& p, const DistributionTable& q) {
  if (p.length != q.length || p.base != q.base || p.probs.size() != q.probs.size())
    throw ShapeError("total variation over mismatched domains");
  return 0.5 * (p.probs - q.probs).cwiseAbs().sum();
}

DistributionTable empirical_distribution(const std::vector<Sequence>& samples, int length,
                                         int base) {
  const std::size_t count = pow_checked(base, length, kMaxStates);
  Eigen::VectorXd probs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(count));
  for (const Sequence& x : samples)
    probs[static_cast<Eigen::Index>(sequence_index(x, base))] += 1.0;
  if (!samples.empty()) probs /= static_cast<double>(samples.size());
  return {length, base, probs};
}

SnisEstimate snis_reference(const WeightFn& weight_fn, const TestFn& g, const Vocab& vocab,
                            int length, int k_snis, int repetitions, RandomStream& rng) {
  if (k_snis < 1 || repetitions < 1)
    throw ConfigError("snis_reference needs k_snis >= 1 and repetitions >= 1");
  SnisEstimate out;
  out.estimates.reserve(static_cast<std::size_t>(repetitions));
  Sequence x(static_cast<std::size_t>(length));
  for (int rep = 0; rep < repetitions; ++rep) {
    double weighted = 0.0;
    double total = 0.0;
    for (int k = 0; k < k_snis; ++k) {
      for (int& token : x) token = rng.uniform_int(vocab.size());
      const double w = weight_fn(x);
      weighted += w * g(x);
      total += w;
    }
    if (!(total > 0.0))
      throw DegenerateBatchError("snis_reference batch with all-zero weights");
    out.estimates.push_back(weighted / total);
  }
  double mean = 0.0;
  for (double e : out.estimates) mean += e;
  mean /= static_cast<double>(repetitions);
  double var = 0.0;
  for (double e : out.estimates) var += (e - mean) * (e - mean);
  var = repetitions > 1 ? var / static_cast<double>(repetitions - 1) : 0.0;
  out.mean = mean;
  out.standard_error = std::sqrt(var / static_cast<double>(repetitions));
  return out;
}

}  // namespace afm
