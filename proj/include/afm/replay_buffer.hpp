#pragma once

#include <iosfwd>
#include <utility>
#include <vector>

#include "afm/core.hpp"

namespace afm {

// Bounded store of observed high-fitness sequences. When full, inserting
// a higher-scoring entry evicts the current lowest score.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, double temperature);

  void insert(const Sequence& x, double score);

  const std::vector<std::pair<Sequence, double>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::size_t capacity() const { return capacity_; }
  double temperature() const { return temperature_; }

  void save_csv(std::ostream& out) const;
  static ReplayBuffer load_csv(std::istream& in, std::size_t capacity, double temperature);

 private:
  std::size_t capacity_;
  double temperature_;
  std::vector<std::pair<Sequence, double>> entries_;
};

// Softmax sampling weights exp(temperature * score), max-shifted for
// stability; sums to 1. Throws on an empty buffer.
Eigen::VectorXd buffer_weights(const ReplayBuffer& buffer);

}  // namespace afm
