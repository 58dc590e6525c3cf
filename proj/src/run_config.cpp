#include "afm/run_config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace afm {

namespace {

std::string trim(const std::string& text) {
  const auto begin = text.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = text.find_last_not_of(" \t\r");
  return text.substr(begin, end - begin + 1);
}

std::string fmt_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

int to_int(const std::string& text, const std::string& key) {
  try {
    return std::stoi(text);
  } catch (const std::exception&) {
    throw ConfigError("bad integer for " + key + ": " + text);
  }
}

double to_double(const std::string& text, const std::string& key) {
  try {
    return std::stod(text);
  } catch (const std::exception&) {
    throw ConfigError("bad number for " + key + ": " + text);
  }
}

std::uint64_t to_u64(const std::string& text, const std::string& key) {
  try {
    return std::stoull(text);
  } catch (const std::exception&) {
    throw ConfigError("bad seed for " + key + ": " + text);
  }
}

bool to_bool(const std::string& text, const std::string& key) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("bad boolean for " + key + ": " + text);
}

}  // namespace

bool ConfigNode::has(const std::string& key) const {
  for (const auto& [k, v] : values)
    if (k == key) return true;
  return false;
}

const std::string& ConfigNode::require(const std::string& key) const {
  for (const auto& [k, v] : values)
    if (k == key) return v;
  throw ConfigError("missing config key: " + key);
}

std::string ConfigNode::get(const std::string& key, const std::string& fallback) const {
  for (const auto& [k, v] : values)
    if (k == key) return v;
  return fallback;
}

const ConfigNode* ConfigNode::block(const std::string& key) const {
  for (const auto& [k, b] : blocks)
    if (k == key) return &b;
  return nullptr;
}

std::vector<const ConfigNode*> ConfigNode::blocks_named(const std::string& key) const {
  std::vector<const ConfigNode*> out;
  for (const auto& [k, b] : blocks)
    if (k == key) out.push_back(&b);
  return out;
}

ConfigNode parse_config_text(const std::string& text) {
  std::vector<ConfigNode> stack(1);
  std::vector<std::string> block_keys;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::string line = trim(raw);
    if (line.empty()) continue;
    if (line == "}") {
      if (stack.size() < 2)
        throw ConfigError("unmatched '}' at line " + std::to_string(line_no));
      ConfigNode done = std::move(stack.back());
      stack.pop_back();
      stack.back().blocks.emplace_back(std::move(block_keys.back()), std::move(done));
      block_keys.pop_back();
      continue;
    }
    if (line.back() == '{') {
      block_keys.push_back(trim(line.substr(0, line.size() - 1)));
      if (block_keys.back().empty())
        throw ConfigError("unnamed block at line " + std::to_string(line_no));
      stack.emplace_back();
      continue;
    }
    const auto space = line.find_first_of(" \t");
    if (space == std::string::npos) {
      stack.back().values.emplace_back(line, "");
    } else {
      stack.back().values.emplace_back(line.substr(0, space),
                                       trim(line.substr(space + 1)));
    }
  }
  if (stack.size() != 1) throw ConfigError("unclosed block in config");
  return std::move(stack.front());
}

namespace {

LandscapeConfig parse_landscape(const ConfigNode& node) {
  LandscapeConfig out;
  out.length = to_int(node.get("length", "12"), "length");
  out.vocab = to_int(node.get("vocab", "8"), "vocab");
  out.motif_count = to_int(node.get("motif_count", "3"), "motif_count");
  out.motif_length = to_int(node.get("motif_length", "4"), "motif_length");
  out.quantisation = to_int(node.get("quantisation", "4"), "quantisation");
  out.seed = to_u64(node.get("seed", "7"), "seed");
  for (const ConfigNode* motif : node.blocks_named("motif")) {
    Motif m;
    m.offset = to_int(motif->require("offset"), "motif offset");
    m.tokens = parse_tokens(motif->require("tokens"));
    out.motifs.push_back(std::move(m));
  }
  for (const auto& [k, v] : node.values) {
    if (k == "banned") {
      const Sequence pair = parse_tokens(v);
      if (pair.size() != 2) throw ConfigError("banned pair needs two tokens: " + v);
      out.banned_pairs.emplace_back(pair[0], pair[1]);
    }
    if (k == "optimum") out.optimum = parse_tokens(v);
  }
  return out;
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  const ConfigNode root = parse_config_text(text);
  RunConfig config;
  config.rounds = to_int(root.get("rounds", "15"), "rounds");
  config.batch_size = to_int(root.get("batch_size", "64"), "batch_size");
  config.init_data = to_int(root.get("init_data", "128"), "init_data");
  config.noise_sigma = to_double(root.get("noise_sigma", "0"), "noise_sigma");
  config.master_seed = to_u64(root.get("master_seed", "1"), "master_seed");
  config.output_dir = root.get("output_dir", "out");
  config.train_log = to_bool(root.get("train_log", "false"), "train_log");

  if (config.rounds < 0) throw ConfigError("rounds must be >= 0");
  if (config.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (config.init_data < 1) throw ConfigError("init_data must be >= 1");

  if (const ConfigNode* node = root.block("landscape"))
    config.landscape = parse_landscape(*node);

  if (const ConfigNode* node = root.block("pretrain")) {
    config.pretrain_pool = to_int(node->get("pool", "1024"), "pool");
    config.pretrain_steps = to_int(node->get("steps", "2000"), "steps");
    config.pretrain_batch = to_int(node->get("batch", "64"), "batch");
    config.pretrain_lr = to_double(node->get("learning_rate", "0.5"), "learning_rate");
  }

  if (const ConfigNode* node = root.block("afm")) {
    config.afm.objective = objective_from_string(node->get("objective", "fwd"));
    config.afm.k_snis = to_int(node->get("k_snis", "128"), "k_snis");
    config.afm.steps_per_round =
        to_int(node->get("steps_per_round", "2000"), "steps_per_round");
    config.afm.learning_rate =
        to_double(node->get("learning_rate", "0.5"), "learning_rate");
    config.afm.lr_decay = to_double(node->get("lr_decay", "0.95"), "lr_decay");
    config.afm.inner_samples = to_int(node->get("inner_samples", "8"), "inner_samples");
  }

  if (const ConfigNode* node = root.block("sampler")) {
    config.sampler.steps = to_int(node->get("k_steps", "8"), "k_steps");
    config.sampler.scheduler.kind =
        scheduler_kind_from_string(node->get("scheduler", "quadratic"));
    config.sampler.force_terminal_unmask =
        to_bool(node->get("terminal_unmask", "true"), "terminal_unmask");
    if (node->has("mutation_budget"))
      config.sampler.mutation_budget =
          to_int(node->require("mutation_budget"), "mutation_budget");
    if (node->has("reference"))
      config.sampler.reference = parse_tokens(node->require("reference"));
    config.source = source_kind_from_string(node->get("source", "mask"));
  } else {
    config.sampler.scheduler.kind = SchedulerKind::Quadratic;
  }

  if (const ConfigNode* node = root.block("cpe")) {
    config.cpe.epochs = to_int(node->get("epochs", "300"), "epochs");
    config.cpe.learning_rate =
        to_double(node->get("learning_rate", "0.3"), "learning_rate");
  }

  if (const ConfigNode* node = root.block("mixture")) {
    config.mixture.replay_cap = to_double(node->get("replay_cap", "0.4"), "replay_cap");
    config.mixture.replay_rate =
        to_double(node->get("replay_rate", "0.05"), "replay_rate");
    config.mixture.flow_share_early =
        to_double(node->get("flow_share_early", "0.1"), "flow_share_early");
    config.mixture.flow_share_late =
        to_double(node->get("flow_share_late", "0.95"), "flow_share_late");
    config.mixture.late_switch_size =
        to_int(node->get("late_switch", "64"), "late_switch");
    if (node->has("fixed")) {
      std::istringstream parts(node->require("fixed"));
      MixtureWeights w{};
      if (!(parts >> w.prior >> w.flow >> w.replay))
        throw ConfigError("mixture fixed needs three coefficients");
      config.mixture.fixed = w;
    }
    config.buffer_capacity = static_cast<std::size_t>(
        to_int(node->get("buffer_capacity", "256"), "buffer_capacity"));
    config.buffer_temperature =
        to_double(node->get("buffer_temperature", "0.3"), "buffer_temperature");
  }

  if (const ConfigNode* node = root.block("threshold")) {
    const std::string kind = node->get("kind", "percentile");
    if (kind == "percentile") {
      config.threshold_schedule.kind = ThresholdKind::Percentile;
      config.threshold_schedule.percentile =
          to_double(node->get("percentile", "90"), "percentile");
    } else if (kind == "ladder") {
      config.threshold_schedule.kind = ThresholdKind::Ladder;
      for (const auto& [k, v] : node->values) {
        if (k != "step") continue;
        std::istringstream parts(v);
        int round;
        double tau;
        if (!(parts >> round >> tau))
          throw ConfigError("threshold step needs `round tau`: " + v);
        config.threshold_schedule.ladder.emplace_back(round, tau);
      }
      if (config.threshold_schedule.ladder.empty())
        throw ConfigError("ladder threshold without steps");
      for (std::size_t i = 1; i < config.threshold_schedule.ladder.size(); ++i)
        if (config.threshold_schedule.ladder[i].second <
            config.threshold_schedule.ladder[i - 1].second)
          throw ConfigError("threshold ladder must be non-decreasing");
    } else {
      throw ConfigError("unknown threshold kind: " + kind);
    }
  }
  return config;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_run_config(text.str());
}

std::string serialise_run_config(const RunConfig& config) {
  std::ostringstream out;
  out << "rounds " << config.rounds << '\n';
  out << "batch_size " << config.batch_size << '\n';
  out << "init_data " << config.init_data << '\n';
  out << "noise_sigma " << fmt_double(config.noise_sigma) << '\n';
  out << "master_seed " << config.master_seed << '\n';
  out << "output_dir " << config.output_dir << '\n';
  out << "train_log " << (config.train_log ? "true" : "false") << '\n';

  out << "landscape {\n";
  out << "  length " << config.landscape.length << '\n';
  out << "  vocab " << config.landscape.vocab << '\n';
  out << "  motif_count " << config.landscape.motif_count << '\n';
  out << "  motif_length " << config.landscape.motif_length << '\n';
  out << "  quantisation " << config.landscape.quantisation << '\n';
  out << "  seed " << config.landscape.seed << '\n';
  for (const Motif& motif : config.landscape.motifs) {
    out << "  motif {\n";
    out << "    offset " << motif.offset << '\n';
    out << "    tokens " << format_tokens(motif.tokens) << '\n';
    out << "  }\n";
  }
  for (const auto& [a, b] : config.landscape.banned_pairs)
    out << "  banned " << a << '-' << b << '\n';
  if (!config.landscape.optimum.empty())
    out << "  optimum " << format_tokens(config.landscape.optimum) << '\n';
  out << "}\n";

  out << "pretrain {\n";
  out << "  pool " << config.pretrain_pool << '\n';
  out << "  steps " << config.pretrain_steps << '\n';
  out << "  batch " << config.pretrain_batch << '\n';
  out << "  learning_rate " << fmt_double(config.pretrain_lr) << '\n';
  out << "}\n";

  out << "afm {\n";
  out << "  objective " << to_string(config.afm.objective) << '\n';
  out << "  k_snis " << config.afm.k_snis << '\n';
  out << "  steps_per_round " << config.afm.steps_per_round << '\n';
  out << "  learning_rate " << fmt_double(config.afm.learning_rate) << '\n';
  out << "  lr_decay " << fmt_double(config.afm.lr_decay) << '\n';
  out << "  inner_samples " << config.afm.inner_samples << '\n';
  out << "}\n";

  out << "sampler {\n";
  out << "  k_steps " << config.sampler.steps << '\n';
  out << "  scheduler " << to_string(config.sampler.scheduler.kind) << '\n';
  out << "  terminal_unmask " << (config.sampler.force_terminal_unmask ? "true" : "false")
      << '\n';
  if (config.sampler.mutation_budget)
    out << "  mutation_budget " << *config.sampler.mutation_budget << '\n';
  if (config.sampler.reference)
    out << "  reference " << format_tokens(*config.sampler.reference) << '\n';
  out << "  source " << to_string(config.source) << '\n';
  out << "}\n";

  out << "cpe {\n";
  out << "  epochs " << config.cpe.epochs << '\n';
  out << "  learning_rate " << fmt_double(config.cpe.learning_rate) << '\n';
  out << "}\n";

  out << "mixture {\n";
  out << "  replay_cap " << fmt_double(config.mixture.replay_cap) << '\n';
  out << "  replay_rate " << fmt_double(config.mixture.replay_rate) << '\n';
  out << "  flow_share_early " << fmt_double(config.mixture.flow_share_early) << '\n';
  out << "  flow_share_late " << fmt_double(config.mixture.flow_share_late) << '\n';
  out << "  late_switch " << config.mixture.late_switch_size << '\n';
  if (config.mixture.fixed)
    out << "  fixed " << fmt_double(config.mixture.fixed->prior) << ' '
        << fmt_double(config.mixture.fixed->flow) << ' '
        << fmt_double(config.mixture.fixed->replay) << '\n';
  out << "  buffer_capacity " << config.buffer_capacity << '\n';
  out << "  buffer_temperature " << fmt_double(config.buffer_temperature) << '\n';
  out << "}\n";

  out << "threshold {\n";
  if (config.threshold_schedule.kind == ThresholdKind::Percentile) {
    out << "  kind percentile\n";
    out << "  percentile " << fmt_double(config.threshold_schedule.percentile) << '\n';
  } else {
    out << "  kind ladder\n";
    for (const auto& [round, tau] : config.threshold_schedule.ladder)
      out << "  step " << round << ' ' << fmt_double(tau) << '\n';
  }
  out << "}\n";
  return out.str();
}

MotifLandscapeSpec build_landscape(const LandscapeConfig& config, SourceKind source) {
  const bool with_mask = source == SourceKind::Mask;
  const Vocab vocab(config.vocab, with_mask);
  if (config.has_explicit_spec()) {
    MotifLandscapeSpec spec;
    spec.length = config.length;
    spec.vocab = vocab;
    spec.quantisation = config.quantisation;
    spec.seed = config.seed;
    spec.motifs = config.motifs;
    spec.banned_pairs = config.banned_pairs;
    spec.optimum = config.optimum;
    if (static_cast<int>(spec.optimum.size()) != spec.length)
      throw ConfigError("explicit landscape optimum has the wrong length");
    if (evaluate(spec, spec.optimum) != 1.0)
      throw ConfigError("explicit landscape optimum does not score 1.0");
    return spec;
  }
  return make_landscape(config.length, vocab, config.motif_count, config.motif_length,
                        config.quantisation, config.seed);
}

void imprint_landscape(LandscapeConfig& config, const MotifLandscapeSpec& spec) {
  config.length = spec.length;
  config.vocab = spec.vocab.size();
  config.quantisation = spec.quantisation;
  config.seed = spec.seed;
  config.motif_count = static_cast<int>(spec.motifs.size());
  config.motif_length =
      spec.motifs.empty() ? config.motif_length : static_cast<int>(spec.motifs.front().tokens.size());
  config.motifs = spec.motifs;
  config.banned_pairs = spec.banned_pairs;
  config.optimum = spec.optimum;
}

}  // namespace afm
