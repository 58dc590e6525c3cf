#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace afm {

// A sequence is a fixed-length array of token ids.
using Sequence = std::vector<int>;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateBatchError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Token alphabet of `size` data tokens, optionally extended by one mask
// slot stored at id == size. Data tokens are 0..size-1; the mask token is
// never a data token.
class Vocab {
 public:
  Vocab(int size, bool with_mask);

  int size() const { return size_; }
  bool has_mask() const { return has_mask_; }
  int mask_token() const;
  // Number of representable token ids (data tokens plus the mask slot).
  int slots() const { return size_ + (has_mask_ ? 1 : 0); }
  bool is_mask(int token) const { return has_mask_ && token == size_; }

 private:
  int size_;
  bool has_mask_;
};

bool contains_mask(const Vocab& vocab, const Sequence& x);
// Throws ShapeError if any token id is outside [0, slots).
void check_tokens(const Vocab& vocab, const Sequence& x);

std::string format_tokens(const Sequence& x);  // "3-1-4"
Sequence parse_tokens(const std::string& text);

// Mixed-radix rank of a sequence; position 0 is the most significant digit.
std::size_t sequence_index(const Sequence& x, int base);
Sequence index_sequence(std::size_t index, int length, int base);
// base^exponent, throwing ConfigError when the result exceeds `limit`.
std::size_t pow_checked(int base, int exponent, std::size_t limit);

void set_log_enabled(bool on);
void log_warn(const std::string& message);

// Deterministic random stream. `derive` fans a master seed out to
// independent subsystem streams keyed by a label, so adding draws in one
// subsystem does not perturb another.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : gen_(seed) {}
  static RandomStream derive(std::uint64_t master_seed, std::string_view label);

  double uniform01();
  int uniform_int(int upper);  // [0, upper)
  double normal();
  // Index draw proportional to nonnegative (unnormalised) weights.
  int categorical(const Eigen::VectorXd& weights);

 private:
  std::mt19937_64 gen_;
};

}  // namespace afm
