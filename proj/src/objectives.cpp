#include "afm/objectives.hpp"

#include <cmath>
#include <ostream>

namespace afm {

namespace {
constexpr double kEntropyFloor = 1e-6;
constexpr int kMaxDegenerateBatches = 10;
}  // namespace

const char* to_string(Objective objective) {
  switch (objective) {
    case Objective::ForwardKl: return "fwd";
    case Objective::ReverseKl: return "rev";
    case Objective::SymmetricKl: return "sym";
  }
  return "?";
}

Objective objective_from_string(const std::string& name) {
  if (name == "fwd") return Objective::ForwardKl;
  if (name == "rev") return Objective::ReverseKl;
  if (name == "sym") return Objective::SymmetricKl;
  throw ConfigError("unknown objective: " + name);
}

TrainBatch induce_train_batch(const std::vector<WeightedSample>& samples,
                              const SourceDistribution& source,
                              const Scheduler& scheduler, RandomStream& rng) {
  if (samples.empty()) throw ShapeError("induce_train_batch over an empty batch");
  Eigen::VectorXd raw(static_cast<Eigen::Index>(samples.size()));
  for (std::size_t k = 0; k < samples.size(); ++k)
    raw[static_cast<Eigen::Index>(k)] = samples[k].weight;

  TrainBatch batch;
  batch.weights = snis_normalise(raw);
  const double t = rng.uniform01();  // one time per batch, shared across elements
  batch.targets.reserve(samples.size());
  batch.states.reserve(samples.size());
  batch.times.assign(samples.size(), t);
  const int length = static_cast<int>(samples.front().x1.size());
  for (const auto& sample : samples) {
    const Sequence x0 = sample_source(source, length, rng);
    batch.targets.push_back(sample.x1);
    batch.states.push_back(sample_conditional_path(x0, sample.x1, t, scheduler, rng));
  }
  return batch;
}

double fwd_kl_loss(const Denoiser& model, const std::vector<WeightedSample>& samples,
                   const SourceDistribution& source, const Scheduler& scheduler,
                   RandomStream& rng) {
  return weighted_ce_loss(model, induce_train_batch(samples, source, scheduler, rng));
}

namespace {

double smoothed_log_prob(const Eigen::MatrixXd& rows, const Sequence& x) {
  const double V = static_cast<double>(rows.cols());
  double log_prob = 0.0;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double p = (1.0 - kEntropyFloor) * rows(i, x[static_cast<std::size_t>(i)]) +
                     kEntropyFloor / V;
    log_prob += std::log(p);
  }
  return log_prob;
}

}  // namespace

RevKlEval rev_kl_on_batch(const Denoiser& phi, const Denoiser& theta, const CpeFn& cpe,
                          const TrainBatch& batch, int inner_samples, RandomStream& rng,
                          const SoftmaxDenoiser* grad_model) {
  if (inner_samples < 2) throw ConfigError("reverse KL needs at least 2 inner samples");
  const int L = phi.length();
  const int V = phi.vocab().size();
  const Eigen::Index n = static_cast<Eigen::Index>(batch.size());

  RevKlEval eval{0.0, Eigen::MatrixXd()};
  Eigen::MatrixXd dz;
  if (grad_model)
    dz = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(L) * V);

  // One shared time per training step lets both denoisers run batched.
  bool shared_time = true;
  for (std::size_t k = 1; k < batch.size() && shared_time; ++k)
    shared_time = batch.times[k] == batch.times[0];
  Eigen::MatrixXd stacked_phi, stacked_theta;
  if (shared_time && n > 1) {
    stacked_phi = phi.predict_batch(batch.states, batch.times[0]);
    stacked_theta = theta.predict_batch(batch.states, batch.times[0]);
  }

  std::vector<double> g(static_cast<std::size_t>(inner_samples));
  std::vector<Sequence> draws(static_cast<std::size_t>(inner_samples));
  for (Eigen::Index k = 0; k < n; ++k) {
    const Sequence& xt = batch.states[static_cast<std::size_t>(k)];
    const double t = batch.times[static_cast<std::size_t>(k)];
    const double w = batch.weights[k];
    const Eigen::MatrixXd rows_phi = stacked_phi.size() > 0
                                         ? stacked_phi.middleRows(k * L, L).eval()
                                         : phi.predict(xt, t);
    const Eigen::MatrixXd rows_theta = stacked_theta.size() > 0
                                           ? stacked_theta.middleRows(k * L, L).eval()
                                           : theta.predict(xt, t);

    double g_sum = 0.0;
    for (int m = 0; m < inner_samples; ++m) {
      Sequence& x1 = draws[static_cast<std::size_t>(m)];
      x1.resize(static_cast<std::size_t>(L));
      for (int i = 0; i < L; ++i)
        x1[static_cast<std::size_t>(i)] = rng.categorical(rows_phi.row(i).transpose());
      const double value = smoothed_log_prob(rows_phi, x1) -
                           smoothed_log_prob(rows_theta, x1) - std::log(cpe(x1));
      if (!std::isfinite(value))
        throw NumericalError("non-finite reverse-KL integrand at state " +
                             format_tokens(xt) + ", endpoint " + format_tokens(x1));
      g[static_cast<std::size_t>(m)] = value;
      g_sum += value;
    }
    eval.loss += w * g_sum / inner_samples;

    if (grad_model) {
      // Score-function estimator with a leave-one-out baseline, plus the
      // pathwise derivative of the log q_phi term (score of the sampling
      // law itself, so the smoothing is immaterial here).
      for (int m = 0; m < inner_samples; ++m) {
        const double baseline =
            (g_sum - g[static_cast<std::size_t>(m)]) / (inner_samples - 1);
        const double coef =
            w * (g[static_cast<std::size_t>(m)] - baseline + 1.0) / inner_samples;
        const Sequence& x1 = draws[static_cast<std::size_t>(m)];
        for (int i = 0; i < L; ++i) {
          dz.row(k).segment(static_cast<Eigen::Index>(i) * V, V) -=
              coef * rows_phi.row(i);
          dz(k, static_cast<Eigen::Index>(i) * V + x1[static_cast<std::size_t>(i)]) +=
              coef;
        }
      }
    }
  }
  if (grad_model) {
    // The loss carries +log q_phi, so d(loss)/d(logit) accumulates
    // coefficient * (onehot - p) per inner draw.
    const Eigen::MatrixXd features =
        grad_model->feature_matrix(batch.states, batch.times);
    eval.grad = dz.transpose() * features;
  }
  return eval;
}

double rev_kl_loss(const Denoiser& phi, const Denoiser& theta, const CpeFn& cpe,
                   const std::vector<WeightedSample>& samples,
                   const SourceDistribution& source, const Scheduler& scheduler,
                   int inner_samples, RandomStream& rng) {
  const TrainBatch batch = induce_train_batch(samples, source, scheduler, rng);
  return rev_kl_on_batch(phi, theta, cpe, batch, inner_samples, rng).loss;
}

double sym_kl_loss(const Denoiser& phi, const Denoiser& theta, const CpeFn& cpe,
                   const std::vector<WeightedSample>& samples,
                   const SourceDistribution& source, const Scheduler& scheduler,
                   int inner_samples, RandomStream& rng) {
  const TrainBatch batch = induce_train_batch(samples, source, scheduler, rng);
  return weighted_ce_loss(phi, batch) +
         rev_kl_on_batch(phi, theta, cpe, batch, inner_samples, rng).loss;
}

AfmRoundStats afm_round(RoundState& state, const AfmConfig& config,
                        const ProposalMixture& mixture, const SamplerConfig& sampler,
                        const SourceDistribution& source, RandomStream& rng,
                        std::ostream* train_log) {
  if (config.k_snis < 2) throw ConfigError("afm_round needs k_snis >= 2");
  const double lr = config.learning_rate * std::pow(config.lr_decay, state.round);

  ProposalEnv env;
  env.mixture = mixture;
  env.buffer = &state.buffer;
  env.base_flow = &state.theta;
  env.source = source;
  env.sampler = sampler;
  env.cpe = [&state](const Sequence& x) { return state.cpe.predict(x); };
  env.length = state.phi.length();
  env.round = state.round;

  if (train_log) *train_log << "step,objective,loss,ess\n";

  AfmRoundStats stats;
  double ess_total = 0.0;
  int degenerate_streak = 0;
  for (int step = 0; step < config.steps_per_round; ++step) {
    TrainBatch batch;
    try {
      const std::vector<WeightedSample> samples = draw_batch(env, config.k_snis, rng);
      batch = induce_train_batch(samples, source, sampler.scheduler, rng);
    } catch (const DegenerateBatchError&) {
      if (++degenerate_streak > kMaxDegenerateBatches)
        throw DegenerateBatchError(
            "aborting round " + std::to_string(state.round) + " after " +
            std::to_string(degenerate_streak) + " consecutive degenerate batches at step " +
            std::to_string(step) + " (tau " + std::to_string(state.tau) + ")");
      --step;  // resample this step's batch
      continue;
    }
    degenerate_streak = 0;

    double loss = 0.0;
    switch (config.objective) {
      case Objective::ForwardKl:
        loss = train_step(state.phi, batch, lr);
        break;
      case Objective::ReverseKl: {
        const RevKlEval eval = rev_kl_on_batch(state.phi, state.theta, env.cpe, batch,
                                               config.inner_samples, rng, &state.phi);
        if (!eval.grad.allFinite())
          throw NumericalError("non-finite reverse-KL gradient");
        state.phi.weights -= lr * eval.grad;
        loss = eval.loss;
        break;
      }
      case Objective::SymmetricKl: {
        double fwd_part = 0.0;
        const Eigen::MatrixXd fwd_grad = weighted_ce_grad(state.phi, batch, &fwd_part);
        const RevKlEval eval = rev_kl_on_batch(state.phi, state.theta, env.cpe, batch,
                                               config.inner_samples, rng, &state.phi);
        const Eigen::MatrixXd grad = fwd_grad + eval.grad;
        if (!grad.allFinite())
          throw NumericalError("non-finite symmetric-KL gradient");
        state.phi.weights -= lr * grad;
        loss = fwd_part + eval.loss;
        break;
      }
    }

    const double ess = 1.0 / batch.weights.squaredNorm();
    ess_total += ess;
    if (train_log) {
      char row[128];
      std::snprintf(row, sizeof row, "%d,%s,%.12g,%.12g\n", step,
                    to_string(config.objective), loss, ess);
      *train_log << row;
    }
    if (stats.steps == 0) stats.first_loss = loss;
    stats.last_loss = loss;
    ++stats.steps;
  }
  stats.mean_ess = stats.steps > 0 ? ess_total / stats.steps : 0.0;
  return stats;
}

}  // namespace afm
