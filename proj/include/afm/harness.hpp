#pragma once

#include <set>
#include <string>
#include <vector>

#include "afm/landscape.hpp"
#include "afm/objectives.hpp"
#include "afm/run_config.hpp"

namespace afm {

struct RoundRecord {
  int round = 0;
  double tau = 0.0;
  std::vector<std::pair<Sequence, double>> batch;  // proposed (x, observed y)
  double best_y = 0.0;   // best observed y over proposed batches so far
  double best_f = 0.0;   // best noiseless landscape score so far
  double regret = 0.0;   // optimum score minus best_f
  double mean_ess = 0.0;
  double seconds = 0.0;  // wall clock; reported in timings.csv only
};

struct MetricsSummary {
  double final_regret;
  double final_best;
  int rounds_to_optimum;  // -1 when the optimum was never proposed
};

// Unweighted cross-entropy pretraining over an unlabelled pool with
// mask-source corruption; the result seeds both the active and base flows.
void pretrain(SoftmaxDenoiser& model, const std::vector<Sequence>& pool, int steps,
              int batch_size, double learning_rate, const SourceDistribution& source,
              RandomStream& rng);
TabularDenoiser pretrain_tabular(const std::vector<Sequence>& pool, const Vocab& vocab,
                                 int length);

// B fresh sequences from the sampler, deduplicated against everything in
// `seen` (which is extended with the accepted proposals); any shortfall is
// filled with uniform valid sequences.
std::vector<Sequence> propose_batch(const Denoiser& model, int count,
                                    std::set<Sequence>& seen, const SamplerConfig& sampler,
                                    const SourceDistribution& source,
                                    const MotifLandscapeSpec& spec, RandomStream& rng);

struct RunResult {
  std::vector<RoundRecord> records;
  MotifLandscapeSpec landscape;
  long oracle_calls = 0;
};

// Full active-generation loop: score an initial dataset, pretrain, then per
// round fit the threshold and classifier, snapshot the base flow, fine-tune,
// propose a batch, observe it and update the dataset and replay buffer.
// Writes rounds.csv, batches.csv, timings.csv, a config echo, the replay
// buffer and final model checkpoints into the output directory.
RunResult run(const RunConfig& config);

// Control arm: the identical loop with uniform valid batches and no model
// training.
RunResult baseline_random(const RunConfig& config);

MetricsSummary metrics(const std::vector<RoundRecord>& records,
                       double optimum_score = 1.0);

std::string rounds_csv(const std::vector<RoundRecord>& records);
std::string batches_csv(const std::vector<RoundRecord>& records);
std::string timings_csv(const std::vector<RoundRecord>& records);
// Extracts (round, regret) rows from rounds.csv text.
std::string plotdata_csv(const std::string& rounds_csv_text);

}  // namespace afm
