#include "afm/flow_dynamics.hpp"

#include <cmath>

namespace afm {

Eigen::MatrixXd velocity(const Eigen::MatrixXd& posterior, const Sequence& xt, double t,
                         const Scheduler& scheduler, const Vocab& vocab) {
  const int L = static_cast<int>(xt.size());
  if (posterior.rows() != L || posterior.cols() != vocab.size())
    throw ShapeError("velocity: posterior shape mismatch");
  const KappaPoint k = kappa(scheduler, t);
  if (k.kappa >= 1.0 - 1e-15)
    throw NumericalError("velocity singular at kappa(t) = 1");
  const double factor = k.rate / (1.0 - k.kappa);

  const int slots = vocab.slots();
  Eigen::MatrixXd rows = Eigen::MatrixXd::Zero(L, slots);
  for (int i = 0; i < L; ++i) {
    rows.row(i).head(vocab.size()) = factor * posterior.row(i);
    rows(i, xt[static_cast<std::size_t>(i)]) -= factor;
  }
  return rows;
}

Eigen::VectorXd transition_kernel(const Eigen::RowVectorXd& velocity_row, int current,
                                  double h) {
  Eigen::VectorXd kernel = h * velocity_row.transpose();
  kernel[current] += 1.0;
  const double worst = kernel.minCoeff();
  if (worst < -kKernelTolerance)
    throw NumericalError("transition kernel entry " + std::to_string(worst) +
                         " below clamp tolerance");
  kernel = kernel.cwiseMax(0.0).cwiseMin(1.0);
  const double sum = kernel.sum();
  if (std::abs(sum - 1.0) > kKernelTolerance)
    throw NumericalError("transition kernel mass " + std::to_string(sum) +
                         " outside tolerance");
  return kernel / sum;
}

Sequence euler_step(const Sequence& xt, const Eigen::MatrixXd& velocity_rows, double h,
                    RandomStream& rng) {
  if (velocity_rows.rows() != static_cast<Eigen::Index>(xt.size()))
    throw ShapeError("euler_step: velocity rows/state length mismatch");
  Sequence next(xt.size());
  for (std::size_t i = 0; i < xt.size(); ++i) {
    const Eigen::VectorXd kernel =
        transition_kernel(velocity_rows.row(static_cast<Eigen::Index>(i)), xt[i], h);
    next[i] = rng.categorical(kernel);
  }
  return next;
}

namespace {

// Resamples residual mask positions from the denoiser's rows at the final
// state; non-mask positions are kept.
Sequence unmask_terminal(const Denoiser& model, const Sequence& x, double t,
                         RandomStream& rng) {
  const Vocab& vocab = model.vocab();
  if (!contains_mask(vocab, x)) return x;
  const Eigen::MatrixXd rows = model.predict(x, t);
  Sequence out = x;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (vocab.is_mask(out[i]))
      out[i] = rng.categorical(rows.row(static_cast<Eigen::Index>(i)).transpose());
  return out;
}

}  // namespace

Sequence generate(const Denoiser& model, const SourceDistribution& source,
                  const SamplerConfig& config, RandomStream& rng) {
  if (config.steps < 1) throw ConfigError("generate needs steps >= 1");
  const double h = 1.0 / config.steps;
  Sequence x = sample_source(source, model.length(), rng);
  for (int step = 0; step < config.steps; ++step) {
    const double t = step * h;
    const Eigen::MatrixXd posterior = model.predict(x, t);
    x = euler_step(x, velocity(posterior, x, t, config.scheduler, model.vocab()), h, rng);
  }
  if (config.force_terminal_unmask)
    x = unmask_terminal(model, x, 1.0 - h, rng);
  return x;
}

std::vector<Sequence> generate_batch(const Denoiser& model, const SourceDistribution& source,
                                     const SamplerConfig& config, int count,
                                     RandomStream& rng) {
  if (config.steps < 1) throw ConfigError("generate needs steps >= 1");
  if (count < 0) throw ShapeError("generate_batch needs count >= 0");
  const double h = 1.0 / config.steps;
  const int L = model.length();
  std::vector<Sequence> states(static_cast<std::size_t>(count));
  for (auto& x : states) x = sample_source(source, L, rng);
  for (int step = 0; step < config.steps; ++step) {
    const double t = step * h;
    const Eigen::MatrixXd stacked = model.predict_batch(states, t);
    for (std::size_t k = 0; k < states.size(); ++k) {
      const Eigen::MatrixXd posterior =
          stacked.middleRows(static_cast<Eigen::Index>(k) * L, L);
      states[k] = euler_step(
          states[k], velocity(posterior, states[k], t, config.scheduler, model.vocab()),
          h, rng);
    }
  }
  if (config.force_terminal_unmask)
    for (auto& x : states) x = unmask_terminal(model, x, 1.0 - h, rng);
  return states;
}

Sequence generate_constrained(const Denoiser& model, const SamplerConfig& config,
                              RandomStream& rng) {
  if (!config.mutation_budget || !config.reference)
    throw ConfigError("constrained generation needs a mutation budget and reference");
  const int budget = *config.mutation_budget;
  if (budget < 0) throw ConfigError("mutation budget must be nonnegative");
  if (config.steps < 1) throw ConfigError("generate needs steps >= 1");

  const Vocab& vocab = model.vocab();
  const int L = model.length();
  Sequence x = *config.reference;
  if (static_cast<int>(x.size()) != L)
    throw ShapeError("constrained generation: reference length mismatch");
  check_tokens(vocab, x);
  if (budget == 0) return x;

  const double h = 1.0 / config.steps;
  const int V = vocab.size();
  int edits = 0;
  for (int step = 0; step < config.steps && edits < budget; ++step) {
    const Eigen::MatrixXd posterior = model.predict(x, step * h);
    // The rate factor is shared by every entry, so sampling proportionally
    // to the rates reduces to sampling the positive posterior excess over
    // the current tokens (mask destinations carry no posterior mass).
    Eigen::VectorXd mass(static_cast<Eigen::Index>(L) * V);
    for (int i = 0; i < L; ++i)
      for (int v = 0; v < V; ++v) {
        const double excess =
            v == x[static_cast<std::size_t>(i)] ? 0.0 : posterior(i, v);
        mass[static_cast<Eigen::Index>(i) * V + v] = excess;
      }
    if (!(mass.sum() > 1e-15)) break;  // no favourable transition remains
    const int pick = rng.categorical(mass);
    x[static_cast<std::size_t>(pick / V)] = pick % V;
    ++edits;
  }
  return x;
}

int hamming_distance(const Sequence& a, const Sequence& b) {
  if (a.size() != b.size()) throw ShapeError("hamming_distance over mismatched lengths");
  int distance = 0;
  for (std::size_t i = 0; i < a.size(); ++i) distance += a[i] != b[i];
  return distance;
}

}  // namespace afm
