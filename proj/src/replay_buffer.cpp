#include "afm/replay_buffer.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace afm {

ReplayBuffer::ReplayBuffer(std::size_t capacity, double temperature)
    : capacity_(capacity), temperature_(temperature) {
  if (capacity == 0) throw ConfigError("replay buffer needs capacity >= 1");
  if (!(temperature > 0.0)) throw ConfigError("replay temperature must be positive");
}

void ReplayBuffer::insert(const Sequence& x, double score) {
  if (entries_.size() < capacity_) {
    entries_.emplace_back(x, score);
    return;
  }
  auto lowest = std::min_element(
      entries_.begin(), entries_.end(),
      [](const auto& a, const auto& b) { return a.second < b.second; });
  if (score > lowest->second) *lowest = {x, score};
}

void ReplayBuffer::save_csv(std::ostream& out) const {
  out << "sequence,y\n";
  for (const auto& [x, y] : entries_) {
    out << format_tokens(x) << ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", y);
    out << buf << '\n';
  }
}

ReplayBuffer ReplayBuffer::load_csv(std::istream& in, std::size_t capacity,
                                    double temperature) {
  ReplayBuffer buffer(capacity, temperature);
  std::string line;
  if (!std::getline(in, line) || line.rfind("sequence,y", 0) != 0)
    throw ConfigError("replay buffer csv missing header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ConfigError("replay buffer csv row without separator: " + line);
    buffer.insert(parse_tokens(line.substr(0, comma)),
                  std::stod(line.substr(comma + 1)));
  }
  return buffer;
}

Eigen::VectorXd buffer_weights(const ReplayBuffer& buffer) {
  if (buffer.empty()) throw ConfigError("sampling weights of an empty replay buffer");
  const auto& entries = buffer.entries();
  Eigen::VectorXd logits(static_cast<Eigen::Index>(entries.size()));
  for (std::size_t j = 0; j < entries.size(); ++j)
    logits[static_cast<Eigen::Index>(j)] = buffer.temperature() * entries[j].second;
  const double shift = logits.maxCoeff();
  Eigen::VectorXd weights = (logits.array() - shift).exp();
  return weights / weights.sum();
}

}  // namespace afm
