#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "afm/core.hpp"

namespace afm {

struct Motif {
  int offset;
  Sequence tokens;
};

// Procedurally generated fitness function over fixed-length sequences:
// motifs placed in disjoint windows score by quantised matched-prefix
// fraction, a banned adjacent-pair list defines validity, and a certified
// optimum with score 1 is stored in the spec.
struct MotifLandscapeSpec {
  int length = 0;
  Vocab vocab{2, true};
  int quantisation = 4;
  std::uint64_t seed = 0;
  std::vector<Motif> motifs;
  std::vector<std::pair<int, int>> banned_pairs;  // adjacent (left, right) data tokens
  Sequence optimum;
};

struct Observation {
  Sequence x;
  double y;
};

MotifLandscapeSpec make_landscape(int length, const Vocab& vocab, int motif_count,
                                  int motif_length, int quantisation, std::uint64_t seed);

// -1 for invalid sequences (mask tokens or banned adjacent pairs), else
// the mean over motifs of floor(prefix_fraction * q) / q; 1.0 when there
// are no motifs.
double evaluate(const MotifLandscapeSpec& spec, const Sequence& x);

Observation observe(const MotifLandscapeSpec& spec, const Sequence& x, double sigma,
                    RandomStream& rng);

// n distinct valid sequences by rejection sampling (attempt cap 100 * n).
std::vector<Sequence> valid_pool(const MotifLandscapeSpec& spec, int n, RandomStream& rng);

}  // namespace afm
