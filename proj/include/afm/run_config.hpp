#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "afm/cpe.hpp"
#include "afm/flow_dynamics.hpp"
#include "afm/landscape.hpp"
#include "afm/objectives.hpp"
#include "afm/proposal.hpp"

namespace afm {

// Parsed form of the block-structured key-value config text:
//   key value
//   key {
//     ...
//   }
// with '#' comments. Keys may repeat.
struct ConfigNode {
  std::vector<std::pair<std::string, std::string>> values;
  std::vector<std::pair<std::string, ConfigNode>> blocks;

  bool has(const std::string& key) const;
  const std::string& require(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  const ConfigNode* block(const std::string& key) const;
  std::vector<const ConfigNode*> blocks_named(const std::string& key) const;
};

ConfigNode parse_config_text(const std::string& text);

// Landscape block: generator parameters, plus the explicit spec (motifs,
// banned pairs, optimum) once a landscape has been realised. An explicit
// spec takes precedence over procedural generation, which is what makes
// echoed configs reproduce a run exactly.
struct LandscapeConfig {
  int length = 12;
  int vocab = 8;
  int motif_count = 3;
  int motif_length = 4;
  int quantisation = 4;
  std::uint64_t seed = 7;
  std::vector<Motif> motifs;
  std::vector<std::pair<int, int>> banned_pairs;
  Sequence optimum;

  bool has_explicit_spec() const { return !optimum.empty(); }
};

struct RunConfig {
  LandscapeConfig landscape;
  int rounds = 15;
  int batch_size = 64;
  int init_data = 128;
  double noise_sigma = 0.0;
  std::uint64_t master_seed = 1;
  std::string output_dir = "out";
  bool train_log = false;

  int pretrain_pool = 1024;
  int pretrain_steps = 2000;
  int pretrain_batch = 64;
  double pretrain_lr = 0.5;

  AfmConfig afm;
  SamplerConfig sampler;
  SourceKind source = SourceKind::Mask;
  CpeFitOptions cpe;

  ProposalMixture mixture;
  std::size_t buffer_capacity = 256;
  double buffer_temperature = 0.3;

  ThresholdSchedule threshold_schedule;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string serialise_run_config(const RunConfig& config);

// Realises the landscape block: explicit spec when present, otherwise
// procedural generation from the block's seed.
MotifLandscapeSpec build_landscape(const LandscapeConfig& config, SourceKind source);
// Copies a realised spec back into the block for echoing.
void imprint_landscape(LandscapeConfig& config, const MotifLandscapeSpec& spec);

}  // namespace afm
