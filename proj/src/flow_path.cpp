#include "afm/flow_path.hpp"

namespace afm {

SourceDistribution mask_source(const Vocab& vocab) {
  if (!vocab.has_mask())
    throw ConfigError("mask source requires a vocab with a mask token");
  return {SourceKind::Mask, vocab};
}

SourceDistribution uniform_source(const Vocab& vocab) {
  return {SourceKind::Uniform, vocab};
}

Sequence sample_source(const SourceDistribution& source, int length, RandomStream& rng) {
  if (length < 1) throw ShapeError("source sample needs length >= 1");
  Sequence x(static_cast<std::size_t>(length));
  if (source.kind == SourceKind::Mask) {
    const int mask = source.vocab.mask_token();
    for (int& token : x) token = mask;
  } else {
    for (int& token : x) token = rng.uniform_int(source.vocab.size());
  }
  return x;
}

Sequence sample_conditional_path(const Sequence& x0, const Sequence& x1, double t,
                                 const Scheduler& scheduler, RandomStream& rng) {
  if (x0.size() != x1.size())
    throw ShapeError("conditional path endpoints differ in length");
  const double k = kappa(scheduler, t).kappa;
  Sequence x(x0.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    x[i] = rng.uniform01() < k ? x1[i] : x0[i];
  return x;
}

double conditional_path_prob(const Sequence& x, const Sequence& x0, const Sequence& x1,
                             double t, const Scheduler& scheduler) {
  if (x.size() != x0.size() || x.size() != x1.size())
    throw ShapeError("conditional path probability over mismatched lengths");
  const double k = kappa(scheduler, t).kappa;
  double prob = 1.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double p = 0.0;
    if (x[i] == x0[i]) p += 1.0 - k;
    if (x[i] == x1[i]) p += k;
    prob *= p;
  }
  return prob;
}

const char* to_string(SourceKind kind) {
  return kind == SourceKind::Mask ? "mask" : "uniform";
}

SourceKind source_kind_from_string(const std::string& name) {
  if (name == "mask") return SourceKind::Mask;
  if (name == "uniform") return SourceKind::Uniform;
  throw ConfigError("unknown source kind: " + name);
}

}  // namespace afm
