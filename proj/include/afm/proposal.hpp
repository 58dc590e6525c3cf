#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "afm/core.hpp"
#include "afm/denoiser.hpp"
#include "afm/flow_dynamics.hpp"
#include "afm/replay_buffer.hpp"

namespace afm {

enum class Component { Prior, Flow, Replay };
const char* to_string(Component component);

struct WeightedSample {
  Sequence x1;
  Component component;
  double weight;  // unnormalised importance weight, finite and >= 0
};

struct MixtureWeights {
  double prior;
  double flow;
  double replay;
};

// Mixing coefficients per round. The default schedule ramps the replay
// share linearly up to a cap and switches the flow share of the non-replay
// mass from a small exploration value to a large refinement value once the
// buffer holds more entries than the oracle batch size. A fixed simplex
// overrides the schedule.
struct ProposalMixture {
  double replay_cap = 0.4;
  double replay_rate = 0.05;
  double flow_share_early = 0.1;
  double flow_share_late = 0.95;
  int late_switch_size = 64;  // buffer entries needed for the late regime
  std::optional<MixtureWeights> fixed;

  MixtureWeights coefficients(int round, std::size_t buffer_size) const;
};

// Draws the component for one batch; mass of unusable components (empty
// buffer, missing flow snapshot) is reassigned to the prior.
Component select_component(const ProposalMixture& mixture, int round,
                           std::size_t buffer_size, bool flow_available,
                           RandomStream& rng);

// Monte Carlo estimate of the flow's endpoint marginal: mean over source
// draws of the product of per-position endpoint probabilities, with the
// denoiser evaluated at the source state (time 0). Deterministic for the
// mask source, where the single source state makes every term identical.
double flow_marginal_mc(const Denoiser& base_flow, const Sequence& x1,
                        const SourceDistribution& source, int sample_count,
                        RandomStream& rng);

using CpeFn = std::function<double(const Sequence&)>;

inline constexpr double kFlowDensityFloor = 1e-30;
inline constexpr double kMaxImportanceWeight = 1e6;

// Per-component importance weights: the prior density cancels against the
// target's prior factor, so the prior weight is the classifier output;
// replay draws are directly observed members of the superlevel set and
// carry unit weight; flow draws divide by the estimated flow marginal
// (floored, with the ratio capped).
double importance_weight(Component component, const Sequence& x1, const CpeFn& cpe,
                         const Denoiser* base_flow, const SourceDistribution& source,
                         int flow_mc_samples, RandomStream& rng);

// w / sum(w); throws DegenerateBatchError when every weight is zero.
Eigen::VectorXd snis_normalise(const Eigen::VectorXd& weights);

struct ProposalEnv {
  ProposalMixture mixture;
  const ReplayBuffer* buffer = nullptr;
  const Denoiser* base_flow = nullptr;
  SourceDistribution source{SourceKind::Uniform, Vocab(2, false)};
  SamplerConfig sampler;
  CpeFn cpe;
  int length = 0;
  int round = 0;
  int flow_mc_samples = 1;
};

// One proposal batch: selects a single component, draws k_snis sequences
// from it and attaches that component's importance weights.
std::vector<WeightedSample> draw_batch(const ProposalEnv& env, int k_snis,
                                       RandomStream& rng);

}  // namespace afm
