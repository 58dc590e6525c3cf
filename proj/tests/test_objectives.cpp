#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "afm/exact_oracle.hpp"
#include "afm/objectives.hpp"

using namespace afm;

namespace {

SoftmaxDenoiser random_softmax(const Vocab& vocab, int length, std::uint64_t seed,
                               double scale = 0.3) {
  SoftmaxDenoiser model(vocab, length, Scheduler{SchedulerKind::Quadratic});
  RandomStream rng(seed);
  for (Eigen::Index r = 0; r < model.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < model.weights.cols(); ++c)
      model.weights(r, c) = scale * rng.normal();
  return model;
}

std::vector<WeightedSample> uniform_samples(const Vocab& vocab, int length, int count,
                                            std::uint64_t seed) {
  RandomStream rng(seed);
  std::vector<WeightedSample> samples;
  for (int k = 0; k < count; ++k) {
    Sequence x(static_cast<std::size_t>(length));
    for (int& token : x) token = rng.uniform_int(vocab.size());
    samples.push_back({x, Component::Prior, 0.1 + rng.uniform01()});
  }
  return samples;
}

}  // namespace

TEST_CASE("forward loss vanishes for a perfect one-hot model") {
  const Vocab vocab(3, true);
  const Sequence target = {2, 1};
  const TabularDenoiser model = fit_tabular_exact({{target, 1.0}}, vocab, 2);
  std::vector<WeightedSample> samples(4, {target, Component::Prior, 1.0});
  RandomStream rng(81);
  const double loss =
      fwd_kl_loss(model, samples, mask_source(vocab), Scheduler{}, rng);
  CHECK(loss == doctest::Approx(0.0));
}

TEST_CASE("selector weights reduce the forward loss to one sample") {
  const Vocab vocab(4, true);
  SoftmaxDenoiser model(vocab, 1, Scheduler{});  // uniform rows
  std::vector<WeightedSample> samples = {{{0}, Component::Prior, 1.0},
                                         {{1}, Component::Prior, 0.0}};
  RandomStream rng(82);
  const double loss =
      fwd_kl_loss(model, samples, mask_source(vocab), Scheduler{}, rng);
  CHECK(loss == doctest::Approx(std::log(4.0)));
}

TEST_CASE("forward loss equals weighted CE on the induced batch bit-exactly") {
  const Vocab vocab(3, true);
  const SoftmaxDenoiser model = random_softmax(vocab, 2, 83);
  const SourceDistribution source = mask_source(vocab);
  const Scheduler scheduler{SchedulerKind::Quadratic};
  for (int trial = 0; trial < 25; ++trial) {
    const std::vector<WeightedSample> samples =
        uniform_samples(vocab, 2, 5, 100 + static_cast<std::uint64_t>(trial));
    RandomStream rng_a(500 + static_cast<std::uint64_t>(trial));
    RandomStream rng_b(500 + static_cast<std::uint64_t>(trial));
    const double fwd = fwd_kl_loss(model, samples, source, scheduler, rng_a);
    const double wce =
        weighted_ce_loss(model, induce_train_batch(samples, source, scheduler, rng_b));
    CHECK(fwd == wce);
  }
}

TEST_CASE("reverse loss reduces to the classifier term when flows match") {
  const Vocab vocab(3, true);
  const SoftmaxDenoiser model = random_softmax(vocab, 2, 84);
  const CpeFn constant = [](const Sequence&) { return 0.5; };
  const std::vector<WeightedSample> samples = uniform_samples(vocab, 2, 6, 85);
  RandomStream rng(86);
  const double loss = rev_kl_loss(model, model, constant, samples,
                                  mask_source(vocab), Scheduler{}, 8, rng);
  CHECK(std::abs(loss - std::log(2.0)) < 1e-12);
}

TEST_CASE("reverse integrand arithmetic on one-hot flows") {
  const Vocab vocab(2, true);
  const Sequence target = {0};
  const TabularDenoiser model = fit_tabular_exact({{target, 1.0}}, vocab, 1);
  const CpeFn half = [](const Sequence&) { return 0.5; };
  TrainBatch batch;
  batch.targets = {target};
  batch.states = {{vocab.mask_token()}};
  batch.times = {0.4};
  batch.weights = Eigen::VectorXd::Ones(1);
  RandomStream rng(87);
  const RevKlEval eval = rev_kl_on_batch(model, model, half, batch, 4, rng);
  CHECK(std::abs(eval.loss - std::log(2.0)) < 1e-12);
}

TEST_CASE("reverse loss matches the exact inner expectation") {
  const Vocab vocab(3, true);
  const SoftmaxDenoiser phi = random_softmax(vocab, 1, 88, 0.5);
  const SoftmaxDenoiser theta = random_softmax(vocab, 1, 89, 0.5);
  ClassProbabilityEstimator cpe_model(vocab, 1);
  RandomStream init(90);
  for (Eigen::Index i = 0; i < cpe_model.weights.size(); ++i)
    cpe_model.weights[i] = init.normal();
  const CpeFn cpe = [&cpe_model](const Sequence& x) { return cpe_model.predict(x); };

  TrainBatch batch;
  batch.targets = {{0}};
  batch.states = {{vocab.mask_token()}};
  batch.times = {0.35};
  batch.weights = Eigen::VectorXd::Ones(1);

  // Exact expectation and variance by enumeration over the three endpoints.
  const Eigen::MatrixXd rows_phi = phi.predict(batch.states[0], batch.times[0]);
  const Eigen::MatrixXd rows_theta = theta.predict(batch.states[0], batch.times[0]);
  const double floor_mass = 1e-6;
  double exact = 0.0, second = 0.0;
  for (int v = 0; v < 3; ++v) {
    const double sp = (1.0 - floor_mass) * rows_phi(0, v) + floor_mass / 3.0;
    const double st = (1.0 - floor_mass) * rows_theta(0, v) + floor_mass / 3.0;
    const double g = std::log(sp) - std::log(st) - std::log(cpe(Sequence{v}));
    exact += rows_phi(0, v) * g;
    second += rows_phi(0, v) * g * g;
  }
  const int m = 10000;
  const double se = std::sqrt(std::max(second - exact * exact, 0.0) / m);

  RandomStream rng(91);
  const RevKlEval eval = rev_kl_on_batch(phi, theta, cpe, batch, m, rng);
  CHECK(std::abs(eval.loss - exact) <= 3.0 * se + 1e-9);
}

TEST_CASE("symmetric loss is the sum of both terms on shared draws") {
  const Vocab vocab(3, true);
  const SoftmaxDenoiser phi = random_softmax(vocab, 2, 92);
  const SoftmaxDenoiser theta = random_softmax(vocab, 2, 93);
  const CpeFn cpe = [](const Sequence& x) { return 0.3 + 0.05 * x[0]; };
  const std::vector<WeightedSample> samples = uniform_samples(vocab, 2, 5, 94);
  const SourceDistribution source = mask_source(vocab);
  const Scheduler scheduler{SchedulerKind::Quadratic};

  RandomStream rng_sym(95);
  const double sym = sym_kl_loss(phi, theta, cpe, samples, source, scheduler, 6, rng_sym);

  RandomStream rng_ref(95);
  const TrainBatch batch = induce_train_batch(samples, source, scheduler, rng_ref);
  const double fwd = weighted_ce_loss(phi, batch);
  const double rev = rev_kl_on_batch(phi, theta, cpe, batch, 6, rng_ref).loss;
  CHECK(sym == fwd + rev);
}

TEST_CASE("symmetric loss shifts by the classifier constant when flows match") {
  const Vocab vocab(3, true);
  const SoftmaxDenoiser model = random_softmax(vocab, 1, 96);
  const CpeFn cpe = [](const Sequence&) { return 0.99; };
  const std::vector<WeightedSample> samples = uniform_samples(vocab, 1, 6, 97);
  const SourceDistribution source = mask_source(vocab);

  RandomStream rng_sym(98);
  const double sym =
      sym_kl_loss(model, model, cpe, samples, source, Scheduler{}, 8, rng_sym);
  RandomStream rng_fwd(98);
  const double fwd = fwd_kl_loss(model, samples, source, Scheduler{}, rng_fwd);
  CHECK(sym == doctest::Approx(fwd - std::log(0.99)).epsilon(1e-10));
}

TEST_CASE("score-function gradient aligns with the exact gradient") {
  const Vocab vocab(3, true);
  SoftmaxDenoiser phi = random_softmax(vocab, 1, 99, 0.4);
  const SoftmaxDenoiser theta = random_softmax(vocab, 1, 100, 0.4);
  const CpeFn cpe = [](const Sequence& x) { return 0.2 + 0.2 * x[0]; };

  TrainBatch batch;
  batch.targets = {{0}};
  batch.states = {{vocab.mask_token()}};
  batch.times = {0.45};
  batch.weights = Eigen::VectorXd::Ones(1);

  // Exact gradient by finite differences of the enumerated expectation.
  const double floor_mass = 1e-6;
  const auto exact_loss = [&](const SoftmaxDenoiser& model) {
    const Eigen::MatrixXd rows = model.predict(batch.states[0], batch.times[0]);
    const Eigen::MatrixXd rows_theta =
        theta.predict(batch.states[0], batch.times[0]);
    double value = 0.0;
    for (int v = 0; v < 3; ++v) {
      const double sp = (1.0 - floor_mass) * rows(0, v) + floor_mass / 3.0;
      const double st = (1.0 - floor_mass) * rows_theta(0, v) + floor_mass / 3.0;
      value += rows(0, v) * (std::log(sp) - std::log(st) - std::log(cpe(Sequence{v})));
    }
    return value;
  };
  Eigen::MatrixXd exact_grad = Eigen::MatrixXd::Zero(phi.weights.rows(),
                                                     phi.weights.cols());
  const double step = 1e-6;
  for (Eigen::Index r = 0; r < phi.weights.rows(); ++r)
    for (Eigen::Index c = 0; c < phi.weights.cols(); ++c) {
      const double saved = phi.weights(r, c);
      phi.weights(r, c) = saved + step;
      const double up = exact_loss(phi);
      phi.weights(r, c) = saved - step;
      const double down = exact_loss(phi);
      phi.weights(r, c) = saved;
      exact_grad(r, c) = (up - down) / (2.0 * step);
    }

  Eigen::MatrixXd mean_grad = Eigen::MatrixXd::Zero(phi.weights.rows(),
                                                    phi.weights.cols());
  RandomStream rng(101);
  const int draws = 10000;
  for (int n = 0; n < draws; ++n)
    mean_grad += rev_kl_on_batch(phi, theta, cpe, batch, 2, rng, &phi).grad;
  mean_grad /= static_cast<double>(draws);

  const double dot = (mean_grad.array() * exact_grad.array()).sum();
  const double cosine = dot / (mean_grad.norm() * exact_grad.norm());
  CHECK(cosine > 0.9);
}

namespace {

RoundState tiny_state(const Vocab& vocab, int length, double cpe_positive_logit) {
  RoundState state{1,
                   {},
                   0.5,
                   SoftmaxDenoiser(vocab, length, Scheduler{}),
                   SoftmaxDenoiser(vocab, length, Scheduler{}),
                   ReplayBuffer(8, 0.3),
                   ClassProbabilityEstimator(vocab, length)};
  // Classifier prefers token 0 at position 0.
  state.cpe.weights[0] = cpe_positive_logit;
  return state;
}

}  // namespace

TEST_CASE("afm_round with zero steps leaves the model unchanged") {
  const Vocab vocab(2, true);
  RoundState state = tiny_state(vocab, 1, 1.5);
  const Eigen::MatrixXd saved = state.phi.weights;
  AfmConfig config;
  config.steps_per_round = 0;
  ProposalMixture mixture;
  mixture.fixed = MixtureWeights{1.0, 0.0, 0.0};
  SamplerConfig sampler;
  sampler.steps = 4;
  RandomStream rng(102);
  afm_round(state, config, mixture, sampler, mask_source(vocab), rng);
  CHECK((state.phi.weights - saved).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("afm_round is deterministic under a fixed seed") {
  const Vocab vocab(2, true);
  AfmConfig config;
  config.k_snis = 8;
  config.steps_per_round = 30;
  config.learning_rate = 0.3;
  ProposalMixture mixture;
  mixture.fixed = MixtureWeights{1.0, 0.0, 0.0};
  SamplerConfig sampler;
  sampler.steps = 4;

  Eigen::MatrixXd weights[2];
  for (int run = 0; run < 2; ++run) {
    RoundState state = tiny_state(vocab, 1, 1.5);
    RandomStream rng(103);
    afm_round(state, config, mixture, sampler, mask_source(vocab), rng);
    weights[run] = state.phi.weights;
  }
  CHECK((weights[0] - weights[1]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("forward-KL fine-tuning moves the terminal law toward the target") {
  const Vocab vocab(2, true);
  RoundState state = tiny_state(vocab, 1, 2.0);
  const SourceDistribution source = mask_source(vocab);

  const TargetDistribution target = target_distribution(
      [&state](const Sequence& x) { return state.cpe.predict(x); }, vocab, 1);

  SamplerConfig sampler;
  sampler.steps = 8;
  const double before = total_variation(
      enumerate_terminal(state.phi, source, sampler.scheduler, sampler.steps, true),
      target.table);

  AfmConfig config;
  config.objective = Objective::ForwardKl;
  config.k_snis = 16;
  config.steps_per_round = 400;
  config.learning_rate = 0.4;
  ProposalMixture mixture;
  mixture.fixed = MixtureWeights{1.0, 0.0, 0.0};
  RandomStream rng(104);
  afm_round(state, config, mixture, sampler, source, rng);

  const double after = total_variation(
      enumerate_terminal(state.phi, source, sampler.scheduler, sampler.steps, true),
      target.table);
  CHECK(after < before);
  CHECK(after < 0.05);
}

TEST_CASE("induce_train_batch rejects all-zero weights") {
  const Vocab vocab(2, true);
  std::vector<WeightedSample> samples = {{{0}, Component::Prior, 0.0},
                                         {{1}, Component::Prior, 0.0}};
  RandomStream rng(106);
  CHECK_THROWS_AS(induce_train_batch(samples, mask_source(vocab), Scheduler{}, rng),
                  DegenerateBatchError);
}

TEST_CASE("the per-step training log carries one row per step") {
  const Vocab vocab(2, true);
  RoundState state = tiny_state(vocab, 1, 1.0);
  AfmConfig config;
  config.k_snis = 4;
  config.steps_per_round = 12;
  ProposalMixture mixture;
  mixture.fixed = MixtureWeights{1.0, 0.0, 0.0};
  SamplerConfig sampler;
  sampler.steps = 4;
  RandomStream rng(107);
  std::ostringstream log;
  afm_round(state, config, mixture, sampler, mask_source(vocab), rng, &log);
  const std::string text = log.str();
  CHECK(text.rfind("step,objective,loss,ess\n", 0) == 0);
  long rows = -1;  // header
  for (const char c : text) rows += c == '\n';
  CHECK(rows == 12);
}

TEST_CASE("reverse and symmetric rounds run and stay finite") {
  const Vocab vocab(2, true);
  const SourceDistribution source = mask_source(vocab);
  for (const Objective objective : {Objective::ReverseKl, Objective::SymmetricKl}) {
    RoundState state = tiny_state(vocab, 1, 1.0);
    AfmConfig config;
    config.objective = objective;
    config.k_snis = 8;
    config.steps_per_round = 50;
    config.learning_rate = 0.1;
    config.inner_samples = 4;
    ProposalMixture mixture;
    mixture.fixed = MixtureWeights{1.0, 0.0, 0.0};
    SamplerConfig sampler;
    sampler.steps = 4;
    RandomStream rng(105);
    const AfmRoundStats stats =
        afm_round(state, config, mixture, sampler, source, rng);
    CHECK(stats.steps == 50);
    CHECK(std::isfinite(stats.last_loss));
    CHECK(state.phi.weights.allFinite());
    CHECK(stats.mean_ess > 0.0);
  }
}
