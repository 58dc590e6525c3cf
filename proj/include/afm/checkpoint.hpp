#pragma once

#include <iosfwd>
#include <string>

#include "afm/cpe.hpp"
#include "afm/denoiser.hpp"

namespace afm {

// Flat binary model checkpoints: a header (magic, version, kind, length,
// vocab size, feature dim) followed by little-endian 64-bit floats in
// row-major order. The kind field distinguishes the model family (and the
// softmax model's scheduler).
void save_checkpoint(const TabularDenoiser& model, std::ostream& out);
void save_checkpoint(const SoftmaxDenoiser& model, std::ostream& out);
void save_checkpoint(const ClassProbabilityEstimator& model, std::ostream& out);

enum class CheckpointKind { Tabular, Softmax, Cpe };
CheckpointKind peek_checkpoint_kind(std::istream& in);

TabularDenoiser load_tabular_checkpoint(std::istream& in);
SoftmaxDenoiser load_softmax_checkpoint(std::istream& in);
ClassProbabilityEstimator load_cpe_checkpoint(std::istream& in);

void save_checkpoint_file(const SoftmaxDenoiser& model, const std::string& path);
void save_checkpoint_file(const ClassProbabilityEstimator& model, const std::string& path);

}  // namespace afm
