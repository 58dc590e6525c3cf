#include "afm/proposal.hpp"

#include <cmath>

namespace afm {

const char* to_string(Component component) {
  switch (component) {
    case Component::Prior: return "prior";
    case Component::Flow: return "flow";
    case Component::Replay: return "replay";
  }
  return "?";
}

MixtureWeights ProposalMixture::coefficients(int round, std::size_t buffer_size) const {
  if (fixed) {
    const MixtureWeights& w = *fixed;
    if (w.prior < 0.0 || w.flow < 0.0 || w.replay < 0.0 ||
        std::abs(w.prior + w.flow + w.replay - 1.0) > 1e-12)
      throw ConfigError("fixed mixture coefficients must form a simplex");
    return w;
  }
  const double replay = std::min(replay_cap, replay_rate * round);
  const double flow_share = buffer_size > static_cast<std::size_t>(late_switch_size)
                                ? flow_share_late
                                : flow_share_early;
  const double flow = (1.0 - replay) * flow_share;
  return {1.0 - replay - flow, flow, replay};
}

Component select_component(const ProposalMixture& mixture, int round,
                           std::size_t buffer_size, bool flow_available,
                           RandomStream& rng) {
  MixtureWeights w = mixture.coefficients(round, buffer_size);
  if (buffer_size == 0 && w.replay > 0.0) {
    log_warn("replay buffer empty: reassigning its proposal mass to the prior");
    w.prior += w.replay;
    w.replay = 0.0;
  }
  if (!flow_available && w.flow > 0.0) {
    log_warn("flow snapshot absent: reassigning its proposal mass to the prior");
    w.prior += w.flow;
    w.flow = 0.0;
  }
  Eigen::Vector3d mass(w.prior, w.flow, w.replay);
  switch (rng.categorical(mass)) {
    case 0: return Component::Prior;
    case 1: return Component::Flow;
    default: return Component::Replay;
  }
}

double flow_marginal_mc(const Denoiser& base_flow, const Sequence& x1,
                        const SourceDistribution& source, int sample_count,
                        RandomStream& rng) {
  if (sample_count < 1) throw ConfigError("flow_marginal_mc needs sample_count >= 1");
  const int L = base_flow.length();
  if (static_cast<int>(x1.size()) != L)
    throw ShapeError("flow_marginal_mc: endpoint length mismatch");

  const auto endpoint_prob = [&](const Sequence& x0) {
    const Eigen::MatrixXd rows = base_flow.predict(x0, 0.0);
    double prob = 1.0;
    for (int i = 0; i < L; ++i) prob *= rows(i, x1[static_cast<std::size_t>(i)]);
    return prob;
  };

  if (source.kind == SourceKind::Mask) {
    // Point-mass source: the integral collapses to a single term.
    const Sequence all_mask(static_cast<std::size_t>(L), source.vocab.mask_token());
    return endpoint_prob(all_mask);
  }
  double total = 0.0;
  for (int n = 0; n < sample_count; ++n)
    total += endpoint_prob(sample_source(source, L, rng));
  return total / sample_count;
}

double importance_weight(Component component, const Sequence& x1, const CpeFn& cpe,
                         const Denoiser* base_flow, const SourceDistribution& source,
                         int flow_mc_samples, RandomStream& rng) {
  switch (component) {
    case Component::Prior:
      return cpe(x1);
    case Component::Replay:
      return 1.0;
    case Component::Flow: {
      if (!base_flow) throw ConfigError("flow importance weight without a base flow");
      double density = flow_marginal_mc(*base_flow, x1, source, flow_mc_samples, rng);
      if (density < kFlowDensityFloor) {
        log_warn("flow marginal below density floor: capping importance weight");
        density = kFlowDensityFloor;
      }
      return std::min(cpe(x1) / density, kMaxImportanceWeight);
    }
  }
  throw ConfigError("unknown proposal component");
}

Eigen::VectorXd snis_normalise(const Eigen::VectorXd& weights) {
  if (weights.size() == 0) throw ShapeError("snis_normalise over an empty batch");
  if (weights.minCoeff() < 0.0)
    throw NumericalError("snis_normalise over a negative weight");
  const double total = weights.sum();
  if (!(total > 0.0))
    throw DegenerateBatchError("importance weights are all zero");
  return weights / total;
}

std::vector<WeightedSample> draw_batch(const ProposalEnv& env, int k_snis,
                                       RandomStream& rng) {
  if (k_snis < 2) throw ConfigError("draw_batch needs k_snis >= 2");
  if (!env.buffer) throw ConfigError("draw_batch needs a replay buffer");
  const Component component = select_component(
      env.mixture, env.round, env.buffer->size(), env.base_flow != nullptr, rng);

  std::vector<WeightedSample> batch;
  batch.reserve(static_cast<std::size_t>(k_snis));
  const int L = env.length > 0 ? env.length
                               : (env.base_flow ? env.base_flow->length() : 0);
  if (L < 1) throw ConfigError("draw_batch needs a sequence length");

  switch (component) {
    case Component::Prior: {
      const SourceDistribution prior = uniform_source(env.source.vocab);
      for (int k = 0; k < k_snis; ++k) {
        Sequence x = sample_source(prior, L, rng);
        const double w = importance_weight(Component::Prior, x, env.cpe, env.base_flow,
                                           env.source, env.flow_mc_samples, rng);
        batch.push_back({std::move(x), Component::Prior, w});
      }
      break;
    }
    case Component::Flow: {
      std::vector<Sequence> draws =
          generate_batch(*env.base_flow, env.source, env.sampler, k_snis, rng);
      for (auto& x : draws) {
        const double w = importance_weight(Component::Flow, x, env.cpe, env.base_flow,
                                           env.source, env.flow_mc_samples, rng);
        batch.push_back({std::move(x), Component::Flow, w});
      }
      break;
    }
    case Component::Replay: {
      const Eigen::VectorXd pi = buffer_weights(*env.buffer);
      for (int k = 0; k < k_snis; ++k) {
        const auto& entry = env.buffer->entries()[static_cast<std::size_t>(rng.categorical(pi))];
        batch.push_back({entry.first, Component::Replay, 1.0});
      }
      break;
    }
  }
  return batch;
}

}  // namespace afm
