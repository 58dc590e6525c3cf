#include "afm/verify.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "afm/cpe.hpp"
#include "afm/exact_oracle.hpp"
#include "afm/harness.hpp"
#include "afm/objectives.hpp"

namespace afm {

namespace {

std::string fmt(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

// Random full-support weighted dataset over all data sequences.
WeightedData random_weighted_targets(const Vocab& vocab, int length, RandomStream& rng) {
  WeightedData data;
  const std::size_t count = pow_checked(vocab.size(), length, 10000);
  for (std::size_t index = 0; index < count; ++index)
    data.emplace_back(index_sequence(index, length, vocab.size()),
                      0.1 + 0.9 * rng.uniform01());
  return data;
}

Eigen::MatrixXd random_posterior(int length, int vocab_size, RandomStream& rng) {
  Eigen::MatrixXd rows(length, vocab_size);
  for (int i = 0; i < length; ++i) {
    for (int v = 0; v < vocab_size; ++v) rows(i, v) = 0.05 + rng.uniform01();
    rows.row(i) /= rows.row(i).sum();
  }
  return rows;
}

CheckResult check_path_kernels() {
  RandomStream rng(11);
  const Scheduler linear{SchedulerKind::Linear};
  const Scheduler quadratic{SchedulerKind::Quadratic};

  // Boundary laws: the path is the point mass at x0 at t=0 and x1 at t=1.
  for (int trial = 0; trial < 50; ++trial) {
    const int L = 1 + rng.uniform_int(2);
    const Vocab vocab(2 + rng.uniform_int(2), true);
    Sequence x0(static_cast<std::size_t>(L)), x1(static_cast<std::size_t>(L));
    for (int i = 0; i < L; ++i) {
      x0[static_cast<std::size_t>(i)] = rng.uniform_int(vocab.slots());
      x1[static_cast<std::size_t>(i)] = rng.uniform_int(vocab.size());
    }
    const Scheduler& sch = trial % 2 ? linear : quadratic;
    if (conditional_path_prob(x0, x0, x1, 0.0, sch) != 1.0 ||
        conditional_path_prob(x1, x0, x1, 1.0, sch) != 1.0)
      return {"path/velocity kernels", false, "boundary law violated"};
    if (sample_conditional_path(x0, x1, 0.0, sch, rng) != x0 ||
        sample_conditional_path(x0, x1, 1.0, sch, rng) != x1)
      return {"path/velocity kernels", false, "boundary sample violated"};
  }

  // Velocity rows sum to zero and Euler kernels stay normalised on the
  // sampler's own time grid (t = k/K with step 1/K).
  double worst_row = 0.0, worst_kernel = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    const int L = 1 + rng.uniform_int(2);
    const Vocab vocab(2 + rng.uniform_int(2), true);
    Sequence xt(static_cast<std::size_t>(L));
    for (int& token : xt) token = rng.uniform_int(vocab.slots());
    const int steps = 2 << rng.uniform_int(3);  // 2, 4 or 8
    const double h = 1.0 / steps;
    const double t = rng.uniform_int(steps) * h;
    const Scheduler& sch = trial % 2 ? linear : quadratic;
    const Eigen::MatrixXd rows =
        velocity(random_posterior(L, vocab.size(), rng), xt, t, sch, vocab);
    for (int i = 0; i < L; ++i) {
      worst_row = std::max(worst_row, std::abs(rows.row(i).sum()));
      const Eigen::VectorXd kernel =
          transition_kernel(rows.row(i), xt[static_cast<std::size_t>(i)], h);
      worst_kernel = std::max(worst_kernel, std::abs(kernel.sum() - 1.0));
    }
  }
  if (worst_row >= 1e-10)
    return {"path/velocity kernels", false, "row sum " + fmt(worst_row)};
  if (worst_kernel >= 1e-10)
    return {"path/velocity kernels", false, "kernel mass " + fmt(worst_kernel)};

  // Sampler/density agreement on tiny instances.
  double worst_tv = 0.0;
  for (const double t : {0.25, 0.5, 0.75}) {
    for (const Scheduler& sch : {linear, quadratic}) {
      const Vocab vocab(3, true);
      const Sequence x0 = {vocab.mask_token(), 0};
      const Sequence x1 = {2, 1};
      std::vector<Sequence> draws;
      draws.reserve(100000);
      for (int n = 0; n < 100000; ++n)
        draws.push_back(sample_conditional_path(x0, x1, t, sch, rng));
      const DistributionTable empirical = empirical_distribution(draws, 2, vocab.slots());
      DistributionTable exact = empirical;
      for (std::size_t index = 0; index < 16; ++index)
        exact.probs[static_cast<Eigen::Index>(index)] = conditional_path_prob(
            index_sequence(index, 2, vocab.slots()), x0, x1, t, sch);
      worst_tv = std::max(worst_tv, total_variation(empirical, exact));
    }
  }
  if (worst_tv >= 0.01)
    return {"path/velocity kernels", false, "sampler/density TV " + fmt(worst_tv)};
  return {"path/velocity kernels", true,
          "row sum " + fmt(worst_row) + ", kernel mass " + fmt(worst_kernel) +
              ", sampler TV " + fmt(worst_tv)};
}

CheckResult check_oracle_equivalence() {
  RandomStream rng(23);
  double worst = 0.0;
  for (const int L : {1, 2}) {
    for (const int V : {2, 3}) {
      for (const int steps : {2, 4}) {
        for (const SchedulerKind kind : {SchedulerKind::Linear, SchedulerKind::Quadratic}) {
          const Vocab vocab(V, true);
          const TabularDenoiser model =
              fit_tabular_exact(random_weighted_targets(vocab, L, rng), vocab, L);
          const Scheduler scheduler{kind};
          const SourceDistribution source = mask_source(vocab);
          const DistributionTable exact =
              enumerate_terminal(model, source, scheduler, steps, true);
          SamplerConfig config;
          config.steps = steps;
          config.scheduler = scheduler;
          config.force_terminal_unmask = true;
          std::vector<Sequence> draws;
          draws.reserve(100000);
          for (int n = 0; n < 100000; ++n)
            draws.push_back(generate(model, source, config, rng));
          const double tv =
              total_variation(empirical_distribution(draws, L, V), exact);
          worst = std::max(worst, tv);
          if (tv >= 0.02)
            return {"oracle equivalence", false,
                    "TV " + fmt(tv) + " at L=" + std::to_string(L) +
                        " V=" + std::to_string(V) + " steps=" + std::to_string(steps) +
                        " " + to_string(kind)};
        }
      }
    }
  }
  return {"oracle equivalence", true, "worst TV " + fmt(worst) + " over 16 instances"};
}

CheckResult check_theorem1() {
  // Instance A: two sequences with target law (0.9, 0.1).
  {
    const Vocab vocab(2, true);
    const WeightedData data = {{{0}, 0.9}, {{1}, 0.1}};
    const TabularDenoiser model = fit_tabular_exact(data, vocab, 1);
    const DistributionTable law = enumerate_terminal(
        model, mask_source(vocab), Scheduler{SchedulerKind::Linear}, 32, true);
    const TargetDistribution target =
        target_distribution([](const Sequence& x) { return x[0] == 0 ? 0.9 : 0.1; },
                            vocab, 1);
    const double tv = total_variation(law, target.table);
    if (tv >= 0.01)
      return {"theorem-1 terminal law", false, "instance A TV " + fmt(tv)};
  }
  // Instance B: per-position classifier-score products over L=2.
  const Vocab vocab(2, true);
  const double c0[2] = {0.7, 0.3};
  const double c1[2] = {0.6, 0.4};
  const auto weight = [&](const Sequence& x) {
    return c0[x[0]] * c1[x[1]];
  };
  WeightedData data;
  for (std::size_t index = 0; index < 4; ++index) {
    const Sequence x = index_sequence(index, 2, 2);
    data.emplace_back(x, weight(x));
  }
  const TabularDenoiser model = fit_tabular_exact(data, vocab, 2);
  const DistributionTable law = enumerate_terminal(
      model, mask_source(vocab), Scheduler{SchedulerKind::Linear}, 32, true);
  const TargetDistribution target = target_distribution(weight, vocab, 2);
  const double tv = total_variation(law, target.table);
  if (tv >= 0.01) return {"theorem-1 terminal law", false, "instance B TV " + fmt(tv)};
  return {"theorem-1 terminal law", true, "instance B TV " + fmt(tv)};
}

CheckResult check_snis() {
  RandomStream rng(37);
  const Vocab vocab(3, true);
  const int L = 2;
  // A classifier-like weight with a clear argmax.
  const auto weight = [](const Sequence& x) {
    double score = 0.1;
    if (x[0] == 2) score += 0.5;
    if (x[1] == 1) score += 0.35;
    return score;
  };
  const Sequence best = {2, 1};
  const auto g = [&best](const Sequence& x) { return x == best ? 1.0 : 0.0; };
  const TargetDistribution target = target_distribution(weight, vocab, L);
  const double exact = target.table.prob(best);

  const SnisEstimate main = snis_reference(weight, g, vocab, L, 10000, 100, rng);
  const double gap = std::abs(main.mean - exact);
  if (gap > 2.0 * main.standard_error)
    return {"snis consistency/bias", false,
            "K=1e4 gap " + fmt(gap) + " vs 2se " + fmt(2.0 * main.standard_error)};

  const SnisEstimate tiny = snis_reference(weight, g, vocab, L, 2, 20000, rng);
  const SnisEstimate large = snis_reference(weight, g, vocab, L, 1000, 2000, rng);
  const double bias_tiny = std::abs(tiny.mean - exact);
  const double bias_large = std::abs(large.mean - exact);
  if (!(bias_large < bias_tiny))
    return {"snis consistency/bias", false,
            "bias did not shrink: K=2 " + fmt(bias_tiny) + ", K=1e3 " + fmt(bias_large)};
  return {"snis consistency/bias", true,
          "gap " + fmt(gap) + " <= 2se, bias " + fmt(bias_tiny) + " -> " +
              fmt(bias_large)};
}

CheckResult check_weight_simplifications() {
  RandomStream rng(41);
  const Vocab vocab(4, true);
  const int L = 3;
  ClassProbabilityEstimator cpe(vocab, L);
  for (Eigen::Index i = 0; i < cpe.weights.size(); ++i)
    cpe.weights[i] = rng.normal();
  const CpeFn cpe_fn = [&cpe](const Sequence& x) { return cpe.predict(x); };
  const SourceDistribution source = mask_source(vocab);

  for (int trial = 0; trial < 100; ++trial) {
    Sequence x(static_cast<std::size_t>(L));
    for (int& token : x) token = rng.uniform_int(vocab.size());
    const double w =
        importance_weight(Component::Prior, x, cpe_fn, nullptr, source, 1, rng);
    if (w != cpe.predict(x))
      return {"weight simplifications", false, "prior weight != classifier output"};
    if (importance_weight(Component::Replay, x, cpe_fn, nullptr, source, 1, rng) != 1.0)
      return {"weight simplifications", false, "replay weight != 1"};
  }
  for (const int k : {2, 5, 128}) {
    const Eigen::VectorXd normalised = snis_normalise(Eigen::VectorXd::Ones(k));
    for (Eigen::Index i = 0; i < k; ++i)
      if (normalised[i] != 1.0 / k)
        return {"weight simplifications", false, "replay normalised weight != 1/K"};
  }
  return {"weight simplifications", true, "bit-exact over 100 draws and 3 batch sizes"};
}

CheckResult check_gradients() {
  RandomStream rng(53);
  const Vocab vocab(3, true);
  const int L = 2;
  const double fd_step = 1e-5;
  double worst = 0.0;

  for (int trial = 0; trial < 5; ++trial) {
    SoftmaxDenoiser model(vocab, L, Scheduler{SchedulerKind::Quadratic});
    for (Eigen::Index r = 0; r < model.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < model.weights.cols(); ++c)
        model.weights(r, c) = 0.3 * rng.normal();
    TrainBatch batch;
    const int n = 6;
    for (int k = 0; k < n; ++k) {
      Sequence x1(static_cast<std::size_t>(L)), xt(static_cast<std::size_t>(L));
      for (int& token : x1) token = rng.uniform_int(vocab.size());
      for (int& token : xt) token = rng.uniform_int(vocab.slots());
      batch.targets.push_back(x1);
      batch.states.push_back(xt);
      batch.times.push_back(rng.uniform01());
    }
    Eigen::VectorXd raw(n);
    for (int k = 0; k < n; ++k) raw[k] = 0.1 + rng.uniform01();
    batch.weights = snis_normalise(raw);

    const Eigen::MatrixXd grad = weighted_ce_grad(model, batch);
    for (int probe = 0; probe < 20; ++probe) {
      const Eigen::Index r = rng.uniform_int(static_cast<int>(model.weights.rows()));
      const Eigen::Index c = rng.uniform_int(static_cast<int>(model.weights.cols()));
      const double saved = model.weights(r, c);
      model.weights(r, c) = saved + fd_step;
      const double up = weighted_ce_loss(model, batch);
      model.weights(r, c) = saved - fd_step;
      const double down = weighted_ce_loss(model, batch);
      model.weights(r, c) = saved;
      const double fd = (up - down) / (2.0 * fd_step);
      const double scale = std::max({std::abs(fd), std::abs(grad(r, c)), 1e-8});
      worst = std::max(worst, std::abs(fd - grad(r, c)) / scale);
    }
  }
  if (worst >= 1e-4)
    return {"gradient checks", false, "softmax relative error " + fmt(worst)};

  double worst_cpe = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    ClassProbabilityEstimator model(vocab, L);
    for (Eigen::Index i = 0; i < model.weights.size(); ++i)
      model.weights[i] = 0.3 * rng.normal();
    LabelledData data;
    for (int k = 0; k < 12; ++k) {
      Sequence x(static_cast<std::size_t>(L));
      for (int& token : x) token = rng.uniform_int(vocab.size());
      data.emplace_back(x, rng.uniform01());
    }
    const double tau = 0.5;
    const Eigen::VectorXd grad = cpe_class_grad(model, data, tau, true);
    for (int probe = 0; probe < 20; ++probe) {
      const Eigen::Index i = rng.uniform_int(static_cast<int>(model.weights.size()));
      const double saved = model.weights[i];
      model.weights[i] = saved + fd_step;
      const double up = cpe_class_loss(model, data, tau, true);
      model.weights[i] = saved - fd_step;
      const double down = cpe_class_loss(model, data, tau, true);
      model.weights[i] = saved;
      const double fd = (up - down) / (2.0 * fd_step);
      const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-8});
      worst_cpe = std::max(worst_cpe, std::abs(fd - grad[i]) / scale);
    }
  }
  if (worst_cpe >= 1e-4)
    return {"gradient checks", false, "classifier relative error " + fmt(worst_cpe)};
  return {"gradient checks", true,
          "softmax " + fmt(worst) + ", classifier " + fmt(worst_cpe)};
}

CheckResult check_fwd_identity() {
  RandomStream rng(67);
  const Vocab vocab(3, true);
  const int L = 2;
  const SourceDistribution source = mask_source(vocab);
  const Scheduler scheduler{SchedulerKind::Quadratic};
  SoftmaxDenoiser model(vocab, L, scheduler);
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c)
      model.weights(r, c) = 0.2 * rng.normal();

  for (int trial = 0; trial < 100; ++trial) {
    std::vector<WeightedSample> samples;
    const int n = 2 + rng.uniform_int(7);
    for (int k = 0; k < n; ++k) {
      Sequence x(static_cast<std::size_t>(L));
      for (int& token : x) token = rng.uniform_int(vocab.size());
      samples.push_back({x, Component::Prior, 0.05 + rng.uniform01()});
    }
    const std::uint64_t seed = 1000 + static_cast<std::uint64_t>(trial);
    RandomStream rng_a(seed), rng_b(seed);
    const double fwd = fwd_kl_loss(model, samples, source, scheduler, rng_a);
    const double wce =
        weighted_ce_loss(model, induce_train_batch(samples, source, scheduler, rng_b));
    if (fwd != wce)
      return {"forward-KL = weighted-CE", false,
              "mismatch " + fmt(fwd - wce) + " at trial " + std::to_string(trial)};
  }
  return {"forward-KL = weighted-CE", true, "bit-exact over 100 batches"};
}

CheckResult check_constrained_sampler() {
  RandomStream rng(79);
  const Vocab vocab(4, true);
  const int L = 10;
  SoftmaxDenoiser model(vocab, L, Scheduler{SchedulerKind::Linear});
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c)
      model.weights(r, c) = 0.5 * rng.normal();

  Sequence reference(static_cast<std::size_t>(L));
  for (int& token : reference) token = rng.uniform_int(vocab.size());

  for (int budget = 0; budget <= 3; ++budget) {
    SamplerConfig config;
    config.steps = 8;
    config.scheduler.kind = SchedulerKind::Linear;
    config.mutation_budget = budget;
    config.reference = reference;
    for (int trial = 0; trial < 25000; ++trial) {
      const Sequence x = generate_constrained(model, config, rng);
      if (hamming_distance(x, reference) > budget)
        return {"constrained sampler budget", false,
                "budget " + std::to_string(budget) + " exceeded"};
    }
  }
  return {"constrained sampler budget", true, "100000 trials within budgets 0..3"};
}

}  // namespace

std::vector<CheckResult> verify_suite() {
  std::vector<CheckResult> results;
  results.push_back(check_path_kernels());
  results.push_back(check_oracle_equivalence());
  results.push_back(check_theorem1());
  results.push_back(check_snis());
  results.push_back(check_weight_simplifications());
  results.push_back(check_gradients());
  results.push_back(check_fwd_identity());
  results.push_back(check_constrained_sampler());
  return results;
}

bool print_check_table(const std::vector<CheckResult>& results) {
  bool all_pass = true;
  for (const CheckResult& result : results) {
    std::printf("%-32s %s  %s\n", result.name.c_str(),
                result.pass ? "PASS" : "FAIL", result.detail.c_str());
    all_pass = all_pass && result.pass;
  }
  return all_pass;
}

}  // namespace afm
