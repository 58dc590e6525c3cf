#pragma once

#include <iosfwd>
#include <vector>

#include "afm/cpe.hpp"
#include "afm/denoiser.hpp"
#include "afm/proposal.hpp"
#include "afm/replay_buffer.hpp"

namespace afm {

enum class Objective { ForwardKl, ReverseKl, SymmetricKl };
const char* to_string(Objective objective);
Objective objective_from_string(const std::string& name);

struct AfmConfig {
  Objective objective = Objective::ForwardKl;
  int k_snis = 128;
  int steps_per_round = 2000;
  double learning_rate = 0.5;   // decayed per round: learning_rate * lr_decay^round
  double lr_decay = 0.95;
  int inner_samples = 8;        // reverse-KL samples per outer state
};

// Per-round bundle carried through the optimisation loop. The base flow
// snapshot stays frozen while the active flow trains.
struct RoundState {
  int round = 0;
  WeightedData dataset;
  double tau = 0.0;
  SoftmaxDenoiser phi;
  SoftmaxDenoiser theta;
  ReplayBuffer buffer;
  ClassProbabilityEstimator cpe;
};

// Normalises the batch weights, draws one shared time and corrupts every
// target along the conditional path from a fresh source draw.
TrainBatch induce_train_batch(const std::vector<WeightedSample>& samples,
                              const SourceDistribution& source,
                              const Scheduler& scheduler, RandomStream& rng);

// Forward-KL objective: self-normalised importance-weighted cross-entropy
// on the induced batch (identical to weighted_ce_loss on it).
double fwd_kl_loss(const Denoiser& model, const std::vector<WeightedSample>& samples,
                   const SourceDistribution& source, const Scheduler& scheduler,
                   RandomStream& rng);

struct RevKlEval {
  double loss;
  Eigen::MatrixXd grad;  // empty unless gradients were requested
};

// Reverse-KL objective on an already induced batch. For every state the
// active flow proposes inner endpoint samples; the integrand is
// log q_phi - log q_theta - log cpe with an entropy floor inside the log
// ratio. Gradients (when grad_model is non-null) combine the
// score-function estimator with a leave-one-out baseline and the pathwise
// derivative of the log q_phi term.
RevKlEval rev_kl_on_batch(const Denoiser& phi, const Denoiser& theta, const CpeFn& cpe,
                          const TrainBatch& batch, int inner_samples, RandomStream& rng,
                          const SoftmaxDenoiser* grad_model = nullptr);

double rev_kl_loss(const Denoiser& phi, const Denoiser& theta, const CpeFn& cpe,
                   const std::vector<WeightedSample>& samples,
                   const SourceDistribution& source, const Scheduler& scheduler,
                   int inner_samples, RandomStream& rng);

// Symmetric objective: forward and reverse terms on the same induced batch
// and time draw.
double sym_kl_loss(const Denoiser& phi, const Denoiser& theta, const CpeFn& cpe,
                   const std::vector<WeightedSample>& samples,
                   const SourceDistribution& source, const Scheduler& scheduler,
                   int inner_samples, RandomStream& rng);

struct AfmRoundStats {
  int steps = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  double mean_ess = 0.0;  // mean over steps of 1 / sum(normalised weights^2)
};

// One fine-tuning round: repeatedly draws a proposal batch, evaluates the
// configured objective and updates the active flow by gradient descent at
// the round's decayed learning rate. More than ten consecutive degenerate
// batches abort the round.
AfmRoundStats afm_round(RoundState& state, const AfmConfig& config,
                        const ProposalMixture& mixture, const SamplerConfig& sampler,
                        const SourceDistribution& source, RandomStream& rng,
                        std::ostream* train_log = nullptr);

}  // namespace afm
