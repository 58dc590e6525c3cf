#include "afm/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

namespace afm {

namespace {

constexpr std::uint32_t kMagic = 0x314D4641u;  // "AFM1"
constexpr std::uint32_t kVersion = 1;

enum : std::uint32_t {
  kKindTabular = 1,
  kKindSoftmaxLinear = 2,
  kKindSoftmaxQuadratic = 3,
  kKindCpe = 4,
};

void write_u32(std::ostream& out, std::uint32_t value) {
  std::array<char, 4> bytes;
  for (int i = 0; i < 4; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((value >> (8 * i)) & 0xFF);
  out.write(bytes.data(), 4);
}

std::uint32_t read_u32(std::istream& in) {
  std::array<unsigned char, 4> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), 4);
  if (!in) throw ConfigError("truncated checkpoint header");
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= static_cast<std::uint32_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
  return value;
}

void write_f64(std::ostream& out, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  std::array<char, 8> bytes;
  for (int i = 0; i < 8; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<char>((bits >> (8 * i)) & 0xFF);
  out.write(bytes.data(), 8);
}

double read_f64(std::istream& in) {
  std::array<unsigned char, 8> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), 8);
  if (!in) throw ConfigError("truncated checkpoint payload");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
  double value;
  std::memcpy(&value, &bits, 8);
  return value;
}

struct Header {
  std::uint32_t kind, length, vocab_size, feature_dim;
};

void write_header(std::ostream& out, const Header& header) {
  write_u32(out, kMagic);
  write_u32(out, kVersion);
  write_u32(out, header.kind);
  write_u32(out, header.length);
  write_u32(out, header.vocab_size);
  write_u32(out, header.feature_dim);
}

Header read_header(std::istream& in) {
  if (read_u32(in) != kMagic) throw ConfigError("bad checkpoint magic");
  if (read_u32(in) != kVersion) throw ConfigError("unsupported checkpoint version");
  Header header;
  header.kind = read_u32(in);
  header.length = read_u32(in);
  header.vocab_size = read_u32(in);
  header.feature_dim = read_u32(in);
  return header;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) write_f64(out, m(r, c));
}

Eigen::MatrixXd read_matrix(std::istream& in, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = read_f64(in);
  return m;
}

}  // namespace

void save_checkpoint(const TabularDenoiser& model, std::ostream& out) {
  const std::uint32_t slots = static_cast<std::uint32_t>(model.vocab().slots());
  write_header(out, {kKindTabular, static_cast<std::uint32_t>(model.length()),
                     static_cast<std::uint32_t>(model.vocab().size()), slots});
  const Eigen::MatrixXd uniform = Eigen::MatrixXd::Constant(
      model.length(), model.vocab().size(), 1.0 / model.vocab().size());
  for (std::size_t context = 0; context < model.context_count(); ++context)
    write_matrix(out, model.has_context(context) ? model.row_block(context) : uniform);
}

void save_checkpoint(const SoftmaxDenoiser& model, std::ostream& out) {
  const std::uint32_t kind = model.scheduler().kind == SchedulerKind::Linear
                                 ? kKindSoftmaxLinear
                                 : kKindSoftmaxQuadratic;
  write_header(out, {kind, static_cast<std::uint32_t>(model.length()),
                     static_cast<std::uint32_t>(model.vocab().size()),
                     static_cast<std::uint32_t>(model.feature_dim())});
  write_matrix(out, model.weights);
}

void save_checkpoint(const ClassProbabilityEstimator& model, std::ostream& out) {
  write_header(out, {kKindCpe, static_cast<std::uint32_t>(model.length()),
                     static_cast<std::uint32_t>(model.vocab().size()),
                     static_cast<std::uint32_t>(model.feature_dim())});
  for (Eigen::Index i = 0; i < model.weights.size(); ++i) write_f64(out, model.weights[i]);
}

CheckpointKind peek_checkpoint_kind(std::istream& in) {
  const auto position = in.tellg();
  const Header header = read_header(in);
  in.seekg(position);
  switch (header.kind) {
    case kKindTabular: return CheckpointKind::Tabular;
    case kKindSoftmaxLinear:
    case kKindSoftmaxQuadratic: return CheckpointKind::Softmax;
    case kKindCpe: return CheckpointKind::Cpe;
  }
  throw ConfigError("unknown checkpoint kind");
}

TabularDenoiser load_tabular_checkpoint(std::istream& in) {
  const Header header = read_header(in);
  if (header.kind != kKindTabular) throw ConfigError("checkpoint is not tabular");
  const int length = static_cast<int>(header.length);
  const int vocab_size = static_cast<int>(header.vocab_size);
  const bool with_mask = header.feature_dim == header.vocab_size + 1;
  TabularDenoiser model(Vocab(vocab_size, with_mask), length);
  for (std::size_t context = 0; context < model.context_count(); ++context) {
    Eigen::MatrixXd rows = read_matrix(in, length, vocab_size);
    model.set_context(index_sequence(context, length, model.vocab().slots()),
                      std::move(rows));
  }
  return model;
}

SoftmaxDenoiser load_softmax_checkpoint(std::istream& in) {
  const Header header = read_header(in);
  if (header.kind != kKindSoftmaxLinear && header.kind != kKindSoftmaxQuadratic)
    throw ConfigError("checkpoint is not a softmax denoiser");
  const int length = static_cast<int>(header.length);
  const int vocab_size = static_cast<int>(header.vocab_size);
  const int slots = (static_cast<int>(header.feature_dim) - 3) / length;
  SoftmaxDenoiser model(
      Vocab(vocab_size, slots == vocab_size + 1), length,
      Scheduler{header.kind == kKindSoftmaxLinear ? SchedulerKind::Linear
                                                  : SchedulerKind::Quadratic});
  if (model.feature_dim() != static_cast<int>(header.feature_dim))
    throw ConfigError("softmax checkpoint feature dim mismatch");
  model.weights = read_matrix(in, model.weights.rows(), model.weights.cols());
  return model;
}

ClassProbabilityEstimator load_cpe_checkpoint(std::istream& in) {
  const Header header = read_header(in);
  if (header.kind != kKindCpe) throw ConfigError("checkpoint is not a classifier");
  const int length = static_cast<int>(header.length);
  const int vocab_size = static_cast<int>(header.vocab_size);
  // The classifier only scores data-token sequences; keep the mask slot so
  // masked inputs are rejected as domain errors rather than bad token ids.
  ClassProbabilityEstimator model(Vocab(vocab_size, true), length);
  if (model.feature_dim() != static_cast<int>(header.feature_dim))
    throw ConfigError("classifier checkpoint feature dim mismatch");
  for (Eigen::Index i = 0; i < model.weights.size(); ++i) model.weights[i] = read_f64(in);
  return model;
}

namespace {
template <class Model>
void save_file(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open checkpoint file " + path);
  save_checkpoint(model, out);
}
}  // namespace

void save_checkpoint_file(const SoftmaxDenoiser& model, const std::string& path) {
  save_file(model, path);
}
void save_checkpoint_file(const ClassProbabilityEstimator& model, const std::string& path) {
  save_file(model, path);
}

}  // namespace afm
