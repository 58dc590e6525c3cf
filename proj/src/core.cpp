#include "afm/core.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>

namespace afm {

Vocab::Vocab(int size, bool with_mask) : size_(size), has_mask_(with_mask) {
  if (size < 2) throw ConfigError("vocab size must be at least 2");
}

int Vocab::mask_token() const {
  if (!has_mask_) throw ConfigError("vocab has no mask token");
  return size_;
}

bool contains_mask(const Vocab& vocab, const Sequence& x) {
  if (!vocab.has_mask()) return false;
  for (int token : x)
    if (token == vocab.mask_token()) return true;
  return false;
}

void check_tokens(const Vocab& vocab, const Sequence& x) {
  for (int token : x)
    if (token < 0 || token >= vocab.slots())
      throw ShapeError("token id " + std::to_string(token) +
                       " outside alphabet of " + std::to_string(vocab.slots()) +
                       " slots");
}

std::string format_tokens(const Sequence& x) {
  std::ostringstream out;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i) out << '-';
    out << x[i];
  }
  return out.str();
}

Sequence parse_tokens(const std::string& text) {
  Sequence out;
  if (text.empty()) return out;
  std::istringstream in(text);
  std::string part;
  while (std::getline(in, part, '-')) {
    try {
      out.push_back(std::stoi(part));
    } catch (const std::exception&) {
      throw ConfigError("bad token list: " + text);
    }
  }
  return out;
}

std::size_t sequence_index(const Sequence& x, int base) {
  std::size_t index = 0;
  for (int token : x) {
    if (token < 0 || token >= base) throw ShapeError("token outside base");
    index = index * static_cast<std::size_t>(base) + static_cast<std::size_t>(token);
  }
  return index;
}

Sequence index_sequence(std::size_t index, int length, int base) {
  Sequence x(static_cast<std::size_t>(length), 0);
  for (int i = length - 1; i >= 0; --i) {
    x[static_cast<std::size_t>(i)] = static_cast<int>(index % static_cast<std::size_t>(base));
    index /= static_cast<std::size_t>(base);
  }
  return x;
}

std::size_t pow_checked(int base, int exponent, std::size_t limit) {
  std::size_t value = 1;
  for (int i = 0; i < exponent; ++i) {
    if (value > limit / static_cast<std::size_t>(base))
      throw ConfigError("state space " + std::to_string(base) + "^" +
                        std::to_string(exponent) + " exceeds limit " +
                        std::to_string(limit));
    value *= static_cast<std::size_t>(base);
  }
  if (value > limit)
    throw ConfigError("state space exceeds limit " + std::to_string(limit));
  return value;
}

namespace {
std::atomic<bool> g_log_enabled{false};
}

void set_log_enabled(bool on) { g_log_enabled.store(on); }

void log_warn(const std::string& message) {
  if (g_log_enabled.load()) std::cerr << "[afm] " << message << '\n';
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t hash = 0xCBF29CE484222325ull;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001B3ull;
  }
  return hash;
}

}  // namespace

RandomStream RandomStream::derive(std::uint64_t master_seed, std::string_view label) {
  return RandomStream(splitmix64(master_seed ^ fnv1a64(label)));
}

double RandomStream::uniform01() {
  // 53-bit mantissa in [0, 1).
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

int RandomStream::uniform_int(int upper) {
  if (upper <= 0) throw ShapeError("uniform_int needs a positive range");
  int draw = static_cast<int>(uniform01() * upper);
  return draw < upper ? draw : upper - 1;
}

double RandomStream::normal() {
  double u1 = uniform01();
  double u2 = uniform01();
  if (u1 < 0x1.0p-53) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

int RandomStream::categorical(const Eigen::VectorXd& weights) {
  const double total = weights.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw NumericalError("categorical draw over non-positive weight total");
  double r = uniform01() * total;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    r -= weights[i];
    if (r < 0.0) return static_cast<int>(i);
  }
  // Floating-point slack: fall back to the last positive entry.
  for (Eigen::Index i = weights.size() - 1; i >= 0; --i)
    if (weights[i] > 0.0) return static_cast<int>(i);
  return static_cast<int>(weights.size() - 1);
}

}  // namespace afm
