#include "afm/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace afm {

namespace {

bool banned(const std::vector<std::pair<int, int>>& pairs, int left, int right) {
  for (const auto& [a, b] : pairs)
    if (a == left && b == right) return true;
  return false;
}

}  // namespace

MotifLandscapeSpec make_landscape(int length, const Vocab& vocab, int motif_count,
                                  int motif_length, int quantisation, std::uint64_t seed) {
  if (length < 1) throw ConfigError("landscape needs length >= 1");
  if (motif_count < 0 || motif_length < 1)
    throw ConfigError("bad motif shape");
  if (quantisation < 1) throw ConfigError("landscape needs quantisation >= 1");
  if (motif_count * motif_length > length)
    throw ConfigError("motif windows do not fit the sequence length");

  MotifLandscapeSpec spec;
  spec.length = length;
  spec.vocab = vocab;
  spec.quantisation = quantisation;
  spec.seed = seed;

  RandomStream rng = RandomStream::derive(seed, "landscape");
  const int V = vocab.size();

  // A small banned-adjacency list supplies the validity constraint.
  const int pair_count = std::max(1, V * V / 16);
  std::set<std::pair<int, int>> pairs;
  int guard = 0;
  while (static_cast<int>(pairs.size()) < pair_count && ++guard < 1000)
    pairs.emplace(rng.uniform_int(V), rng.uniform_int(V));
  spec.banned_pairs.assign(pairs.begin(), pairs.end());

  for (int attempt = 0; attempt < 100; ++attempt) {
    // Disjoint windows: spread the slack over the gaps before each motif.
    const int slack = length - motif_count * motif_length;
    std::vector<int> gaps(static_cast<std::size_t>(motif_count) + 1, 0);
    for (int s = 0; s < slack; ++s)
      ++gaps[static_cast<std::size_t>(rng.uniform_int(motif_count + 1))];

    // One left-to-right pass builds the optimum while avoiding banned
    // adjacencies; window contents become the motif definitions.
    Sequence optimum;
    optimum.reserve(static_cast<std::size_t>(length));
    bool stuck = false;
    for (int i = 0; i < length && !stuck; ++i) {
      std::vector<int> options;
      for (int v = 0; v < V; ++v)
        if (optimum.empty() || !banned(spec.banned_pairs, optimum.back(), v))
          options.push_back(v);
      if (options.empty()) {
        stuck = true;
        break;
      }
      optimum.push_back(options[static_cast<std::size_t>(
          rng.uniform_int(static_cast<int>(options.size())))]);
    }
    if (stuck) continue;

    std::vector<Motif> motifs;
    int cursor = 0;
    for (int m = 0; m < motif_count; ++m) {
      cursor += gaps[static_cast<std::size_t>(m)];
      Motif motif;
      motif.offset = cursor;
      motif.tokens.assign(optimum.begin() + cursor,
                          optimum.begin() + cursor + motif_length);
      motifs.push_back(std::move(motif));
      cursor += motif_length;
    }

    spec.motifs = std::move(motifs);
    spec.optimum = std::move(optimum);
    if (evaluate(spec, spec.optimum) == 1.0) return spec;
    spec.motifs.clear();
    spec.optimum.clear();
  }
  throw ConfigError("could not construct a feasible landscape (seed " +
                    std::to_string(seed) + ")");
}

double evaluate(const MotifLandscapeSpec& spec, const Sequence& x) {
  if (static_cast<int>(x.size()) != spec.length)
    throw ShapeError("landscape evaluate: length mismatch");
  check_tokens(spec.vocab, x);
  if (contains_mask(spec.vocab, x)) return -1.0;
  for (std::size_t i = 0; i + 1 < x.size(); ++i)
    if (banned(spec.banned_pairs, x[i], x[i + 1])) return -1.0;

  if (spec.motifs.empty()) return 1.0;
  double total = 0.0;
  for (const Motif& motif : spec.motifs) {
    const int len = static_cast<int>(motif.tokens.size());
    int prefix = 0;
    while (prefix < len &&
           x[static_cast<std::size_t>(motif.offset + prefix)] ==
               motif.tokens[static_cast<std::size_t>(prefix)])
      ++prefix;
    const double fraction = static_cast<double>(prefix) / len;
    total += std::floor(fraction * spec.quantisation) / spec.quantisation;
  }
  return total / static_cast<double>(spec.motifs.size());
}

Observation observe(const MotifLandscapeSpec& spec, const Sequence& x, double sigma,
                    RandomStream& rng) {
  if (sigma < 0.0) throw ConfigError("observation noise must be nonnegative");
  const double f = evaluate(spec, x);
  return {x, sigma == 0.0 ? f : f + sigma * rng.normal()};
}

std::vector<Sequence> valid_pool(const MotifLandscapeSpec& spec, int n, RandomStream& rng) {
  if (n < 0) throw ShapeError("valid_pool needs n >= 0");
  std::set<Sequence> seen;
  std::vector<Sequence> pool;
  pool.reserve(static_cast<std::size_t>(n));
  const long attempts_cap = 100L * std::max(n, 1);
  long attempts = 0;
  Sequence x(static_cast<std::size_t>(spec.length));
  while (static_cast<int>(pool.size()) < n) {
    if (++attempts > attempts_cap)
      throw NumericalError("valid_pool exhausted " + std::to_string(attempts_cap) +
                           " attempts at " + std::to_string(pool.size()) + "/" +
                           std::to_string(n) + " sequences");
    for (int& token : x) token = rng.uniform_int(spec.vocab.size());
    if (evaluate(spec, x) < 0.0) continue;
    if (!seen.insert(x).second) continue;
    pool.push_back(x);
  }
  return pool;
}

}  // namespace afm
