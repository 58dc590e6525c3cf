#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "afm/exact_oracle.hpp"
#include "afm/harness.hpp"

using namespace afm;

namespace {

std::string temp_dir(const std::string& tag) {
  const auto path = std::filesystem::temp_directory_path() / ("afm_test_" + tag);
  std::filesystem::remove_all(path);
  return path.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::ostringstream text;
  text << in.rdbuf();
  return text.str();
}

RunConfig small_config(const std::string& tag) {
  RunConfig config;
  config.landscape.length = 4;
  config.landscape.vocab = 4;
  config.landscape.motif_count = 1;
  config.landscape.motif_length = 2;
  config.landscape.quantisation = 2;
  config.landscape.seed = 3;
  config.rounds = 2;
  config.batch_size = 4;
  config.init_data = 8;
  config.pretrain_pool = 24;
  config.pretrain_steps = 40;
  config.pretrain_batch = 8;
  config.pretrain_lr = 0.4;
  config.afm.k_snis = 8;
  config.afm.steps_per_round = 30;
  config.afm.learning_rate = 0.3;
  config.sampler.steps = 4;
  config.cpe.epochs = 60;
  config.buffer_capacity = 16;
  config.master_seed = 11;
  config.output_dir = temp_dir(tag);
  return config;
}

// Trivial two-valued landscape over a four-sequence space, used for
// exhaustion tests: f = 1 when position 0 holds token 0, else 0.
MotifLandscapeSpec tiny_spec() {
  MotifLandscapeSpec spec;
  spec.length = 2;
  spec.vocab = Vocab(2, true);
  spec.quantisation = 1;
  spec.motifs = {{0, {0}}};
  spec.optimum = {0, 0};
  return spec;
}

}  // namespace

TEST_CASE("pretrain with zero steps leaves the model unchanged") {
  const Vocab vocab(4, true);
  SoftmaxDenoiser model(vocab, 3, Scheduler{});
  const Eigen::MatrixXd saved = model.weights;
  RandomStream rng(121);
  pretrain(model, {{0, 1, 2}}, 0, 4, 0.5, mask_source(vocab), rng);
  CHECK((model.weights - saved).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tabular pretrain on a single sequence generates that sequence") {
  const Vocab vocab(3, true);
  const Sequence only = {2, 0};
  const TabularDenoiser model = pretrain_tabular({only}, vocab, 2);
  SamplerConfig config;
  config.steps = 4;
  RandomStream rng(122);
  for (int n = 0; n < 200; ++n)
    CHECK(generate(model, mask_source(vocab), config, rng) == only);
}

TEST_CASE("pretraining lowers the held-out denoising loss") {
  const Vocab vocab(4, true);
  const MotifLandscapeSpec spec = make_landscape(6, vocab, 1, 3, 3, 19);
  RandomStream pool_rng(123);
  const std::vector<Sequence> pool = valid_pool(spec, 64, pool_rng);
  const std::vector<Sequence> held_out = valid_pool(spec, 32, pool_rng);

  SoftmaxDenoiser model(vocab, 6, Scheduler{SchedulerKind::Quadratic});
  const SourceDistribution source = mask_source(vocab);

  const auto held_out_ce = [&](const SoftmaxDenoiser& m) {
    RandomStream rng(124);
    double total = 0.0;
    for (const Sequence& x1 : held_out)
      for (const double t : {0.2, 0.5, 0.8}) {
        const Sequence x0 = sample_source(source, 6, rng);
        total += ce_loss(m, x1, sample_conditional_path(x0, x1, t, m.scheduler(), rng), t);
      }
    return total / (3.0 * held_out.size());
  };

  const double before = held_out_ce(model);
  RandomStream rng(125);
  pretrain(model, pool, 300, 16, 0.4, source, rng);
  CHECK(held_out_ce(model) < before);
}

TEST_CASE("propose_batch returns fresh mask-free sequences") {
  const Vocab vocab(4, true);
  const MotifLandscapeSpec spec = make_landscape(4, vocab, 1, 2, 2, 21);
  SoftmaxDenoiser model(vocab, 4, Scheduler{});
  SamplerConfig sampler;
  sampler.steps = 4;
  std::set<Sequence> seen;
  RandomStream rng(126);
  const std::vector<Sequence> batch =
      propose_batch(model, 6, seen, sampler, mask_source(vocab), spec, rng);
  CHECK(batch.size() == 6);
  std::set<Sequence> unique(batch.begin(), batch.end());
  CHECK(unique.size() == 6);
  for (const Sequence& x : batch) CHECK_FALSE(contains_mask(vocab, x));
}

TEST_CASE("propose_batch is forced onto the one unseen sequence") {
  const MotifLandscapeSpec spec = tiny_spec();
  SoftmaxDenoiser model(spec.vocab, 2, Scheduler{});
  SamplerConfig sampler;
  sampler.steps = 2;
  std::set<Sequence> seen = {{0, 0}, {0, 1}, {1, 0}};
  RandomStream rng(127);
  const std::vector<Sequence> batch =
      propose_batch(model, 1, seen, sampler, mask_source(spec.vocab), spec, rng);
  REQUIRE(batch.size() == 1);
  CHECK(batch[0] == Sequence{1, 1});
}

TEST_CASE("propose_batch is deterministic under a fixed seed") {
  const Vocab vocab(4, true);
  const MotifLandscapeSpec spec = make_landscape(4, vocab, 1, 2, 2, 23);
  SoftmaxDenoiser model(vocab, 4, Scheduler{});
  SamplerConfig sampler;
  sampler.steps = 4;
  std::vector<Sequence> batches[2];
  for (int run = 0; run < 2; ++run) {
    std::set<Sequence> seen;
    RandomStream rng(128);
    batches[run] = propose_batch(model, 5, seen, sampler, mask_source(vocab), spec, rng);
  }
  CHECK(batches[0] == batches[1]);
}

TEST_CASE("a zero-round run only scores the initial dataset") {
  RunConfig config = small_config("r0");
  config.rounds = 0;
  const RunResult result = run(config);
  CHECK(result.records.empty());
  CHECK(result.oracle_calls == config.init_data);
  const std::string csv = slurp(config.output_dir + "/rounds.csv");
  CHECK(csv == "round,tau,best_y,best_f,regret,ess_mean\n");
  std::filesystem::remove_all(config.output_dir);
}

TEST_CASE("oracle budget accounting and record monotonicity") {
  RunConfig config = small_config("budget");
  const RunResult result = run(config);
  CHECK(result.oracle_calls == config.init_data + config.rounds * config.batch_size);
  REQUIRE(result.records.size() == 2);

  double previous_best = -1e300;
  double previous_regret = 1e300;
  long batch_rows = 0;
  for (const RoundRecord& record : result.records) {
    CHECK(record.best_y >= previous_best);
    CHECK(record.regret <= previous_regret);
    CHECK(record.regret == doctest::Approx(1.0 - record.best_f));
    previous_best = record.best_y;
    previous_regret = record.regret;
    batch_rows += static_cast<long>(record.batch.size());
  }
  CHECK(batch_rows == config.rounds * config.batch_size);
  std::filesystem::remove_all(config.output_dir);
}

TEST_CASE("full runs are byte-identical under the same master seed") {
  RunConfig config_a = small_config("det_a");
  RunConfig config_b = small_config("det_b");
  config_b.master_seed = config_a.master_seed;
  const RunResult result_a = run(config_a);
  const RunResult result_b = run(config_b);
  CHECK(slurp(config_a.output_dir + "/rounds.csv") ==
        slurp(config_b.output_dir + "/rounds.csv"));
  CHECK(slurp(config_a.output_dir + "/batches.csv") ==
        slurp(config_b.output_dir + "/batches.csv"));
  CHECK(rounds_csv(result_a.records) == rounds_csv(result_b.records));
  std::filesystem::remove_all(config_a.output_dir);
  std::filesystem::remove_all(config_b.output_dir);
}

TEST_CASE("the echoed config reproduces the identical run") {
  RunConfig config = small_config("echo_a");
  const RunResult original = run(config);
  const std::string echo_text = slurp(config.output_dir + "/config.txt");

  RunConfig replayed = parse_run_config(echo_text);
  CHECK(replayed.landscape.has_explicit_spec());
  replayed.output_dir = temp_dir("echo_b");
  const RunResult replay = run(replayed);
  CHECK(rounds_csv(original.records) == rounds_csv(replay.records));
  std::filesystem::remove_all(config.output_dir);
  std::filesystem::remove_all(replayed.output_dir);
}

TEST_CASE("baseline exhausts a tiny space and reaches the optimum") {
  RunConfig config;
  imprint_landscape(config.landscape, tiny_spec());
  config.rounds = 3;
  config.batch_size = 1;
  config.init_data = 1;
  config.pretrain_steps = 0;
  config.master_seed = 5;
  config.output_dir = temp_dir("exhaust");
  const RunResult result = baseline_random(config);
  CHECK(result.oracle_calls == 4);  // the whole space
  CHECK(result.records.back().regret == 0.0);
  std::filesystem::remove_all(config.output_dir);
}

TEST_CASE("metrics summarise regret and rounds to optimum") {
  std::vector<RoundRecord> records(3);
  records[0].round = 1;
  records[0].best_f = 0.8;
  records[0].best_y = 0.8;
  records[0].regret = 0.2;
  records[1].round = 2;
  records[1].best_f = 1.0;
  records[1].best_y = 1.0;
  records[1].regret = 0.0;
  records[2].round = 3;
  records[2].best_f = 1.0;
  records[2].best_y = 1.0;
  records[2].regret = 0.0;

  const MetricsSummary summary = metrics(records);
  CHECK(summary.final_regret == 0.0);
  CHECK(summary.final_best == 1.0);
  CHECK(summary.rounds_to_optimum == 2);

  const MetricsSummary partial = metrics({records[0]});
  CHECK(partial.final_regret == doctest::Approx(0.2));
  CHECK(partial.rounds_to_optimum == -1);

  CHECK_THROWS_AS(metrics({}), ConfigError);
}

TEST_CASE("dataset grows monotonically and buffer entries clear their threshold") {
  RunConfig config = small_config("buffer");
  const RunResult result = run(config);
  // Every buffer row was admitted at some round with y >= tau of that round;
  // the weakest bound across rounds is the minimum tau.
  double min_tau = 1e300;
  for (const RoundRecord& record : result.records) min_tau = std::min(min_tau, record.tau);
  std::ifstream in(config.output_dir + "/replay_buffer.csv");
  REQUIRE(in.good());
  const ReplayBuffer buffer = ReplayBuffer::load_csv(in, 64, 0.3);
  for (const auto& [x, y] : buffer.entries()) CHECK(y >= min_tau);
  std::filesystem::remove_all(config.output_dir);
}

TEST_CASE("config round-trips through serialisation") {
  RunConfig config = small_config("roundtrip");
  config.afm.objective = Objective::SymmetricKl;
  config.threshold_schedule.kind = ThresholdKind::Ladder;
  config.threshold_schedule.ladder = {{0, 0.25}, {2, 0.5}};
  config.mixture.fixed = MixtureWeights{0.5, 0.25, 0.25};
  config.sampler.mutation_budget = 2;

  const std::string text = serialise_run_config(config);
  const RunConfig parsed = parse_run_config(text);
  CHECK(parsed.rounds == config.rounds);
  CHECK(parsed.afm.objective == Objective::SymmetricKl);
  CHECK(parsed.threshold_schedule.kind == ThresholdKind::Ladder);
  REQUIRE(parsed.threshold_schedule.ladder.size() == 2);
  CHECK(parsed.threshold_schedule.ladder[1].second == 0.5);
  REQUIRE(parsed.mixture.fixed.has_value());
  CHECK(parsed.mixture.fixed->flow == 0.25);
  CHECK(parsed.sampler.mutation_budget == 2);
  CHECK(serialise_run_config(parsed) == text);
}

TEST_CASE("plotdata extracts the regret column") {
  std::vector<RoundRecord> records(2);
  records[0].round = 1;
  records[0].tau = 0.5;
  records[0].best_y = 0.75;
  records[0].best_f = 0.75;
  records[0].regret = 0.25;
  records[1].round = 2;
  records[1].tau = 0.6;
  records[1].best_y = 1.0;
  records[1].best_f = 1.0;
  records[1].regret = 0.0;
  const std::string plot = plotdata_csv(rounds_csv(records));
  CHECK(plot == "round,regret\n1,0.25\n2,0\n");
  CHECK_THROWS_AS(plotdata_csv("bogus\n"), ConfigError);
}
