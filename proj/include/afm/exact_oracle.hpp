#pragma once

#include <functional>
#include <vector>

#include "afm/core.hpp"
#include "afm/denoiser.hpp"
#include "afm/flow_dynamics.hpp"

namespace afm {

// Dense law over the full space base^length, indexed by sequence rank.
struct DistributionTable {
  int length = 0;
  int base = 0;
  Eigen::VectorXd probs;

  double prob(const Sequence& x) const { return probs[static_cast<Eigen::Index>(sequence_index(x, base))]; }
};

struct TargetDistribution {
  DistributionTable table;
  double normaliser;  // mean of the weight function under the uniform prior
};

using WeightFn = std::function<double(const Sequence&)>;
using TestFn = std::function<double(const Sequence&)>;

// p*(x) proportional to w(x) under the uniform prior over data-token
// sequences; also reports the normaliser Z = mean of w.
TargetDistribution target_distribution(const WeightFn& weight_fn, const Vocab& vocab,
                                       int length);

// Exact terminal law of the Euler-discretised sampler: pushes the full
// joint state distribution through the same per-step transition kernels
// generate() draws from, then applies terminal unmasking as a final
// kernel. Positions couple through the denoiser, so kernels are built per
// joint state. Returned over data tokens when unmasking is forced,
// otherwise over all slots.
DistributionTable enumerate_terminal(const Denoiser& model, const SourceDistribution& source,
                                     const Scheduler& scheduler, int steps,
                                     bool force_terminal_unmask);

double total_variation(const DistributionTable& p, const DistributionTable& q);

DistributionTable empirical_distribution(const std::vector<Sequence>& samples, int length,
                                         int base);

struct SnisEstimate {
  double mean;
  double standard_error;
  std::vector<double> estimates;  // one self-normalised estimate per repetition
};

// Self-normalised importance-sampling estimates of E_{p*}[g] from the
// uniform proposal, for comparison against target_distribution.
SnisEstimate snis_reference(const WeightFn& weight_fn, const TestFn& g, const Vocab& vocab,
                            int length, int k_snis, int repetitions, RandomStream& rng);

}  // namespace afm
