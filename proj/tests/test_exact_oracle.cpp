#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "afm/exact_oracle.hpp"

using namespace afm;

TEST_CASE("target_distribution normalises weights under the uniform prior") {
  const Vocab vocab(2, true);
  const TargetDistribution law = target_distribution(
      [](const Sequence& x) { return x[0] == 0 ? 0.9 : 0.1; }, vocab, 1);
  CHECK(law.table.prob({0}) == doctest::Approx(0.9));
  CHECK(law.table.prob({1}) == doctest::Approx(0.1));
  CHECK(law.normaliser == (0.9 + 0.1) / 2.0);

  const TargetDistribution flat =
      target_distribution([](const Sequence&) { return 0.37; }, vocab, 2);
  for (Eigen::Index i = 0; i < flat.table.probs.size(); ++i)
    CHECK(flat.table.probs[i] == doctest::Approx(0.25));
  CHECK(flat.normaliser == doctest::Approx(0.37));

  const TargetDistribution skew = target_distribution(
      [](const Sequence& x) { return x[0] == 0 ? 0.3 : 0.1; }, vocab, 1);
  CHECK(skew.table.prob({0}) == doctest::Approx(0.75));
  CHECK(skew.table.prob({1}) == doctest::Approx(0.25));

  CHECK_THROWS_AS(target_distribution([](const Sequence&) { return 0.0; }, vocab, 1),
                  DegenerateBatchError);
}

TEST_CASE("normaliser equals the mean weight bit-exactly") {
  const Vocab vocab(3, true);
  RandomStream rng(41);
  std::vector<double> w(9);
  for (double& v : w) v = rng.uniform01();
  const TargetDistribution law = target_distribution(
      [&w](const Sequence& x) { return w[static_cast<std::size_t>(x[0] * 3 + x[1])]; },
      vocab, 2);
  double sum = 0.0;
  for (std::size_t i = 0; i < 9; ++i) sum += w[i];
  CHECK(law.normaliser == sum / 9.0);
}

TEST_CASE("enumerate_terminal of a one-hot denoiser is a point mass") {
  const Vocab vocab(3, true);
  const Sequence target = {1, 2};
  const TabularDenoiser model = fit_tabular_exact({{target, 1.0}}, vocab, 2);
  for (const int steps : {1, 3, 8}) {
    const DistributionTable law = enumerate_terminal(
        model, mask_source(vocab), Scheduler{SchedulerKind::Linear}, steps, true);
    CHECK(law.prob(target) == doctest::Approx(1.0));
  }
}

TEST_CASE("single-step enumeration with unmasking is the t=0 posterior row") {
  const Vocab vocab(3, true);
  const TabularDenoiser model =
      fit_tabular_exact({{{0}, 0.5}, {{1}, 0.3}, {{2}, 0.2}}, vocab, 1);
  const DistributionTable law = enumerate_terminal(
      model, mask_source(vocab), Scheduler{SchedulerKind::Quadratic}, 1, true);
  const Eigen::MatrixXd expected = model.predict({vocab.mask_token()}, 0.0);
  for (int v = 0; v < 3; ++v)
    CHECK(law.prob({v}) == doctest::Approx(expected(0, v)).epsilon(1e-12));
}

TEST_CASE("enumerated law conserves mass and excludes mask states") {
  const Vocab vocab(3, true);
  RandomStream rng(42);
  WeightedData data;
  for (int k = 0; k < 5; ++k) {
    Sequence x(2);
    for (int& token : x) token = rng.uniform_int(vocab.size());
    data.emplace_back(x, 0.2 + rng.uniform01());
  }
  const TabularDenoiser model = fit_tabular_exact(data, vocab, 2);
  const DistributionTable law = enumerate_terminal(
      model, mask_source(vocab), Scheduler{SchedulerKind::Quadratic}, 4, true);
  CHECK(std::abs(law.probs.sum() - 1.0) < 1e-10);
  CHECK(law.base == vocab.size());  // data tokens only
  CHECK(law.probs.minCoeff() >= 0.0);
}

TEST_CASE("theorem-1 instance: weighted fit generates the target law") {
  const Vocab vocab(2, true);
  const TabularDenoiser model = fit_tabular_exact({{{0}, 0.9}, {{1}, 0.1}}, vocab, 1);
  const DistributionTable law = enumerate_terminal(
      model, mask_source(vocab), Scheduler{SchedulerKind::Linear}, 32, true);
  const TargetDistribution target = target_distribution(
      [](const Sequence& x) { return x[0] == 0 ? 0.9 : 0.1; }, vocab, 1);
  CHECK(total_variation(law, target.table) < 0.01);
}

TEST_CASE("total variation basics") {
  DistributionTable p{1, 2, Eigen::Vector2d(1.0, 0.0)};
  DistributionTable q{1, 2, Eigen::Vector2d(0.0, 1.0)};
  CHECK(total_variation(p, p) == 0.0);
  CHECK(total_variation(p, q) == 1.0);

  DistributionTable a{1, 2, Eigen::Vector2d(0.9, 0.1)};
  DistributionTable b{1, 2, Eigen::Vector2d(0.75, 0.25)};
  CHECK(total_variation(a, b) == doctest::Approx(0.15));

  DistributionTable wide{1, 3, Eigen::Vector3d(1.0, 0.0, 0.0)};
  CHECK_THROWS_AS(total_variation(p, wide), ShapeError);
}

TEST_CASE("snis_reference of a constant is exactly one") {
  const Vocab vocab(3, true);
  RandomStream rng(43);
  const SnisEstimate estimate = snis_reference(
      [](const Sequence& x) { return 0.2 + 0.1 * x[0]; },
      [](const Sequence&) { return 1.0; }, vocab, 2, 64, 50, rng);
  for (const double value : estimate.estimates) CHECK(value == 1.0);
  CHECK(estimate.mean == 1.0);
}

TEST_CASE("snis_reference concentrates on the exact value") {
  const Vocab vocab(3, true);
  RandomStream rng(44);
  const auto weight = [](const Sequence& x) {
    return 0.1 + (x[0] == 2 ? 0.6 : 0.0) + (x[1] == 0 ? 0.2 : 0.0);
  };
  const Sequence best = {2, 0};
  const auto g = [&best](const Sequence& x) { return x == best ? 1.0 : 0.0; };
  const TargetDistribution target = target_distribution(weight, vocab, 2);
  const double exact = target.table.prob(best);

  const SnisEstimate estimate = snis_reference(weight, g, vocab, 2, 10000, 100, rng);
  CHECK(std::abs(estimate.mean - exact) <= 2.0 * estimate.standard_error);

  const SnisEstimate tiny = snis_reference(weight, g, vocab, 2, 2, 8000, rng);
  const SnisEstimate large = snis_reference(weight, g, vocab, 2, 1000, 800, rng);
  CHECK(std::abs(large.mean - exact) < std::abs(tiny.mean - exact));
}
