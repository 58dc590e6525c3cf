#pragma once

#include "afm/core.hpp"
#include "afm/scheduler.hpp"

namespace afm {

enum class SourceKind { Mask, Uniform };

// Source law p0 over sequences. The mask kind is the point mass on the
// all-mask sequence; the uniform kind is i.i.d. uniform over data tokens
// (the mask slot is excluded).
struct SourceDistribution {
  SourceKind kind;
  Vocab vocab;
};

SourceDistribution mask_source(const Vocab& vocab);
SourceDistribution uniform_source(const Vocab& vocab);

Sequence sample_source(const SourceDistribution& source, int length, RandomStream& rng);

// Draws from the convex interpolation path: per position, the target token
// with probability kappa(t), the source token otherwise.
Sequence sample_conditional_path(const Sequence& x0, const Sequence& x1, double t,
                                 const Scheduler& scheduler, RandomStream& rng);

// Probability of x under the conditional path given endpoints (x0, x1);
// zero whenever some position of x matches neither endpoint.
double conditional_path_prob(const Sequence& x, const Sequence& x0, const Sequence& x1,
                             double t, const Scheduler& scheduler);

const char* to_string(SourceKind kind);
SourceKind source_kind_from_string(const std::string& name);

}  // namespace afm
