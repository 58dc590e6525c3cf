#include "afm/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "afm/checkpoint.hpp"

namespace afm {

void pretrain(SoftmaxDenoiser& model, const std::vector<Sequence>& pool, int steps,
              int batch_size, double learning_rate, const SourceDistribution& source,
              RandomStream& rng) {
  if (pool.empty()) throw ConfigError("pretrain over an empty pool");
  if (batch_size < 1) throw ConfigError("pretrain needs batch_size >= 1");
  const int L = model.length();
  TrainBatch batch;
  batch.weights =
      Eigen::VectorXd::Constant(batch_size, 1.0 / static_cast<double>(batch_size));
  for (int step = 0; step < steps; ++step) {
    batch.targets.clear();
    batch.states.clear();
    batch.times.clear();
    const double t = rng.uniform01();
    for (int k = 0; k < batch_size; ++k) {
      const Sequence& x1 =
          pool[static_cast<std::size_t>(rng.uniform_int(static_cast<int>(pool.size())))];
      const Sequence x0 = sample_source(source, L, rng);
      batch.targets.push_back(x1);
      batch.states.push_back(
          sample_conditional_path(x0, x1, t, model.scheduler(), rng));
      batch.times.push_back(t);
    }
    train_step(model, batch, learning_rate);
  }
}

TabularDenoiser pretrain_tabular(const std::vector<Sequence>& pool, const Vocab& vocab,
                                 int length) {
  if (pool.empty()) throw ConfigError("pretrain over an empty pool");
  WeightedData weighted;
  weighted.reserve(pool.size());
  for (const Sequence& x : pool) weighted.emplace_back(x, 1.0);
  return fit_tabular_exact(weighted, vocab, length);
}

namespace {

Sequence uniform_valid_sequence(const MotifLandscapeSpec& spec, RandomStream& rng) {
  Sequence x(static_cast<std::size_t>(spec.length));
  for (long guard = 0; guard < 100000; ++guard) {
    for (int& token : x) token = rng.uniform_int(spec.vocab.size());
    if (evaluate(spec, x) >= 0.0) return x;
  }
  throw NumericalError("could not draw a valid sequence in 100000 attempts");
}

}  // namespace

std::vector<Sequence> propose_batch(const Denoiser& model, int count,
                                    std::set<Sequence>& seen, const SamplerConfig& sampler,
                                    const SourceDistribution& source,
                                    const MotifLandscapeSpec& spec, RandomStream& rng) {
  if (count < 1) throw ConfigError("propose_batch needs count >= 1");
  std::vector<Sequence> batch;
  batch.reserve(static_cast<std::size_t>(count));

  const long cap = 20L * count;
  long attempts = 0;
  while (static_cast<int>(batch.size()) < count && attempts < cap) {
    const int want = count - static_cast<int>(batch.size());
    const int chunk = static_cast<int>(std::min<long>(want, cap - attempts));
    std::vector<Sequence> draws;
    if (sampler.mutation_budget) {
      draws.reserve(static_cast<std::size_t>(chunk));
      for (int i = 0; i < chunk; ++i)
        draws.push_back(generate_constrained(model, sampler, rng));
    } else {
      draws = generate_batch(model, source, sampler, chunk, rng);
    }
    attempts += chunk;
    for (auto& x : draws) {
      if (static_cast<int>(batch.size()) >= count) break;
      if (seen.insert(x).second) batch.push_back(std::move(x));
    }
  }

  if (static_cast<int>(batch.size()) < count)
    log_warn("propose_batch: filling " +
             std::to_string(count - static_cast<int>(batch.size())) +
             " proposals with uniform valid sequences");
  const long fill_cap = 200L * count;
  long fill_attempts = 0;
  while (static_cast<int>(batch.size()) < count && fill_attempts < fill_cap) {
    ++fill_attempts;
    Sequence x = uniform_valid_sequence(spec, rng);
    if (seen.insert(x).second) batch.push_back(std::move(x));
  }
  while (static_cast<int>(batch.size()) < count) {
    // Space effectively exhausted by the dedupe set: allow repeats.
    Sequence x = uniform_valid_sequence(spec, rng);
    log_warn("propose_batch: duplicate fallback fill");
    batch.push_back(std::move(x));
  }
  return batch;
}

namespace {

std::string fmt(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

struct LoopMode {
  bool baseline = false;
};

RunResult run_loop(const RunConfig& config_in, LoopMode mode) {
  RunConfig config = config_in;
  MotifLandscapeSpec spec = build_landscape(config.landscape, config.source);
  imprint_landscape(config.landscape, spec);
  const Vocab vocab = spec.vocab;
  const int L = spec.length;
  const SourceDistribution source =
      config.source == SourceKind::Mask ? mask_source(vocab) : uniform_source(vocab);
  const double optimum_score = evaluate(spec, spec.optimum);

  RandomStream rng_init = RandomStream::derive(config.master_seed, "init-pool");
  RandomStream rng_pretrain = RandomStream::derive(config.master_seed, "pretrain");
  RandomStream rng_noise = RandomStream::derive(config.master_seed, "oracle-noise");

  RunResult result;
  result.landscape = spec;
  const auto score = [&](const Sequence& x) {
    ++result.oracle_calls;
    return observe(spec, x, config.noise_sigma, rng_noise).y;
  };

  std::set<Sequence> seen;
  RoundState state{0,
                   {},
                   0.0,
                   SoftmaxDenoiser(vocab, L, config.sampler.scheduler),
                   SoftmaxDenoiser(vocab, L, config.sampler.scheduler),
                   ReplayBuffer(config.buffer_capacity, config.buffer_temperature),
                   ClassProbabilityEstimator(vocab, L)};

  for (const Sequence& x : valid_pool(spec, config.init_data, rng_init)) {
    const double y = score(x);
    state.dataset.emplace_back(x, y);
    seen.insert(x);
  }

  if (!mode.baseline && config.pretrain_steps > 0 && config.pretrain_pool > 0) {
    const std::vector<Sequence> pool = valid_pool(spec, config.pretrain_pool, rng_init);
    pretrain(state.phi, pool, config.pretrain_steps, config.pretrain_batch,
             config.pretrain_lr, source, rng_pretrain);
  }

  const bool manage_output = !config.output_dir.empty();
  if (manage_output) std::filesystem::create_directories(config.output_dir);
  const auto out_path = [&](const std::string& name) {
    return (std::filesystem::path(config.output_dir) / name).string();
  };

  double best_y = -std::numeric_limits<double>::infinity();
  double best_f = -std::numeric_limits<double>::infinity();
  Sequence best_x;
  for (int r = 1; r <= config.rounds; ++r) {
    const auto t_start = std::chrono::steady_clock::now();
    std::vector<double> labels;
    labels.reserve(state.dataset.size());
    for (const auto& [x, y] : state.dataset) labels.push_back(y);
    state.round = r;
    state.tau = threshold(config.threshold_schedule, r, labels);

    SamplerConfig sampler = config.sampler;
    if (sampler.mutation_budget && !sampler.reference)
      sampler.reference = best_x.empty() ? state.dataset.front().first : best_x;

    AfmRoundStats stats;
    if (!mode.baseline) {
      state.cpe = cpe_fit(state.dataset, state.tau, vocab, L, config.cpe);
      state.theta = state.phi;
      RandomStream rng_train = RandomStream::derive(
          config.master_seed, "round-" + std::to_string(r) + "-train");
      std::ofstream train_log;
      if (config.train_log && manage_output) {
        train_log.open(out_path("train_log_round_" + std::to_string(r) + ".csv"));
        stats = afm_round(state, config.afm, config.mixture, sampler, source, rng_train,
                          &train_log);
      } else {
        stats = afm_round(state, config.afm, config.mixture, sampler, source, rng_train);
      }
    }

    RandomStream rng_propose = RandomStream::derive(
        config.master_seed, "round-" + std::to_string(r) + "-propose");
    std::vector<Sequence> proposals;
    if (mode.baseline) {
      proposals.reserve(static_cast<std::size_t>(config.batch_size));
      long fill_attempts = 0;
      while (static_cast<int>(proposals.size()) < config.batch_size) {
        Sequence x = uniform_valid_sequence(spec, rng_propose);
        if (seen.insert(x).second)
          proposals.push_back(std::move(x));
        else if (++fill_attempts > 200L * config.batch_size)
          proposals.push_back(std::move(x));  // space exhausted: allow repeats
      }
    } else {
      proposals = propose_batch(state.phi, config.batch_size, seen, sampler, source,
                                spec, rng_propose);
    }

    RoundRecord record;
    record.round = r;
    record.tau = state.tau;
    record.mean_ess = stats.mean_ess;
    for (Sequence& x : proposals) {
      const double y = score(x);
      const double f = evaluate(spec, x);
      if (y > best_y) best_y = y;
      if (f > best_f) {
        best_f = f;
        best_x = x;
      }
      state.dataset.emplace_back(x, y);
      if (y >= state.tau) state.buffer.insert(x, y);
      record.batch.emplace_back(std::move(x), y);
    }
    record.best_y = best_y;
    record.best_f = best_f;
    record.regret = optimum_score - best_f;
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start)
            .count();
    result.records.push_back(std::move(record));
  }

  if (manage_output) {
    std::ofstream(out_path("config.txt")) << serialise_run_config(config);
    std::ofstream(out_path("rounds.csv")) << rounds_csv(result.records);
    std::ofstream(out_path("batches.csv")) << batches_csv(result.records);
    std::ofstream(out_path("timings.csv")) << timings_csv(result.records);
    std::ofstream buffer_out(out_path("replay_buffer.csv"));
    state.buffer.save_csv(buffer_out);
    if (!mode.baseline) {
      save_checkpoint_file(state.phi, out_path("flow.ckpt"));
      save_checkpoint_file(state.cpe, out_path("cpe.ckpt"));
    }
  }
  return result;
}

}  // namespace

RunResult run(const RunConfig& config) { return run_loop(config, {false}); }

RunResult baseline_random(const RunConfig& config) { return run_loop(config, {true}); }

MetricsSummary metrics(const std::vector<RoundRecord>& records, double optimum_score) {
  if (records.empty()) throw ConfigError("metrics over an empty record list");
  MetricsSummary summary;
  summary.final_regret = records.back().regret;
  summary.final_best = records.back().best_y;
  summary.rounds_to_optimum = -1;
  for (const RoundRecord& record : records) {
    if (record.best_f >= optimum_score - 1e-12) {
      summary.rounds_to_optimum = record.round;
      break;
    }
  }
  return summary;
}

std::string rounds_csv(const std::vector<RoundRecord>& records) {
  std::ostringstream out;
  out << "round,tau,best_y,best_f,regret,ess_mean\n";
  for (const RoundRecord& r : records)
    out << r.round << ',' << fmt(r.tau) << ',' << fmt(r.best_y) << ',' << fmt(r.best_f)
        << ',' << fmt(r.regret) << ',' << fmt(r.mean_ess) << '\n';
  return out.str();
}

std::string batches_csv(const std::vector<RoundRecord>& records) {
  std::ostringstream out;
  out << "round,sequence,y\n";
  for (const RoundRecord& r : records)
    for (const auto& [x, y] : r.batch)
      out << r.round << ',' << format_tokens(x) << ',' << fmt(y) << '\n';
  return out.str();
}

std::string timings_csv(const std::vector<RoundRecord>& records) {
  std::ostringstream out;
  out << "round,seconds\n";
  for (const RoundRecord& r : records) out << r.round << ',' << fmt(r.seconds) << '\n';
  return out.str();
}

std::string plotdata_csv(const std::string& rounds_csv_text) {
  std::istringstream in(rounds_csv_text);
  std::ostringstream out;
  std::string line;
  if (!std::getline(in, line) || line.rfind("round,tau,", 0) != 0)
    throw ConfigError("unrecognised rounds.csv header");
  out << "round,regret\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() < 5) throw ConfigError("short rounds.csv row: " + line);
    out << cells[0] << ',' << cells[4] << '\n';
  }
  return out.str();
}

}  // namespace afm
