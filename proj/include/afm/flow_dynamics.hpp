#pragma once

#include <optional>
#include <vector>

#include "afm/core.hpp"
#include "afm/denoiser.hpp"
#include "afm/flow_path.hpp"
#include "afm/scheduler.hpp"

namespace afm {

struct SamplerConfig {
  int steps = 8;  // Euler steps; step size is 1/steps
  Scheduler scheduler{};
  bool force_terminal_unmask = true;
  std::optional<int> mutation_budget;   // requires reference
  std::optional<Sequence> reference;
};

// Probability velocity rows, one per position over all alphabet slots:
// u(x'|x_t) = rate/(1-kappa) * [posterior(x') - delta_{x_t}(x')]. Rows sum
// to zero; off-diagonal entries are nonnegative. Throws NumericalError at
// kappa(t) = 1 (callers use terminal unmasking there instead).
Eigen::MatrixXd velocity(const Eigen::MatrixXd& posterior, const Sequence& xt, double t,
                         const Scheduler& scheduler, const Vocab& vocab);

// Categorical kernel delta_{current} + h * u for one position, clamped to
// [0,1] and renormalised. Deviations beyond kKernelTolerance are errors.
inline constexpr double kKernelTolerance = 1e-8;
Eigen::VectorXd transition_kernel(const Eigen::RowVectorXd& velocity_row, int current,
                                  double h);

Sequence euler_step(const Sequence& xt, const Eigen::MatrixXd& velocity_rows, double h,
                    RandomStream& rng);

// Euler-discretised CTMC sampling over the left-endpoint grid t = 0, h,
// ..., 1-h. With force_terminal_unmask, positions still masked after the
// final step are resampled from the denoiser at the final state (time 1-h).
Sequence generate(const Denoiser& model, const SourceDistribution& source,
                  const SamplerConfig& config, RandomStream& rng);

// Lockstep batch variant of generate (same per-sequence law, batched
// denoiser calls).
std::vector<Sequence> generate_batch(const Denoiser& model, const SourceDistribution& source,
                                     const SamplerConfig& config, int count,
                                     RandomStream& rng);

// Mutation-budget-constrained sampling: starts from the reference, applies
// at most one edit per step drawn proportionally to the positive
// off-diagonal rates (self-transitions and the mask slot excluded), stops
// after the budget is spent or no positive rate remains.
Sequence generate_constrained(const Denoiser& model, const SamplerConfig& config,
                              RandomStream& rng);

int hamming_distance(const Sequence& a, const Sequence& b);

}  // namespace afm
