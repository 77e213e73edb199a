#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcp/beam_search.hpp"
#include "mcp/corpus/io.hpp"
#include "mcp/corpus/synthetic.hpp"
#include "mcp/encoders.hpp"
#include "mcp/generator.hpp"
#include "mcp/metrics/persona.hpp"
#include "mcp/mining/config.hpp"
#include "mcp/numeric/optimizer.hpp"
#include "mcp/objectives.hpp"

namespace mcp::pipeline {

struct EvaluationConfig {
  std::vector<std::string> stopwords = metrics::default_stopwords();
  std::string word_vectors;  // empty: use the generator's word embeddings
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvaluationConfig, stopwords, word_vectors)

struct AnalysisConfig {
  std::size_t pca_users = 4;
  std::size_t max_users = 1000;
  std::size_t histogram_bins = 20;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AnalysisConfig, pca_users, max_users, histogram_bins)

/// Pre-training term weights; the objective is their plain sum by default.
struct LossWeights {
  double utt = 1.0;
  double seq = 1.0;
  double user = 1.0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossWeights, utt, seq, user)

inline nn::TransformerConfig small_transformer() {
  nn::TransformerConfig c;
  c.num_layers = 1;
  c.hidden_size = 32;
  c.num_heads = 4;
  c.ff_multiplier = 2;
  c.max_positions = 32;
  return c;
}

struct RunConfig {
  std::string corpus;  // JSONL dialogue corpus; empty = generate `synthetic`
  corpus::SyntheticSpec synthetic;
  std::string output_dir = "runs/default";
  std::uint64_t seed = 13;

  std::size_t min_freq = 1;
  std::size_t max_vocab = 30000;
  corpus::SplitRatios split;
  mining::MinerConfig miner;

  nn::TransformerConfig utterance = small_transformer();
  nn::TransformerConfig history = small_transformer();
  nn::TransformerConfig generator = small_transformer();
  EncoderOptions encoder;
  GeneratorOptions generator_options;
  NegativeMode negatives = NegativeMode::kPositives;
  LossWeights loss_weights;

  std::size_t batch_size = 16;
  nn::AdamConfig pretrain_optimizer;
  nn::AdamConfig finetune_optimizer;
  std::size_t pretrain_epochs = 5;
  std::size_t finetune_epochs = 3;
  std::size_t max_steps_per_epoch = 0;  // 0 = one pass over the largest pair family

  bool disable_utt_task = false;
  bool disable_seq_task = false;
  bool disable_user_task = false;
  bool use_pretraining = true;  // false: fine-tune from random encoders
  bool freeze_encoders = false;

  GenerationConfig generation;
  EvaluationConfig evaluation;
  AnalysisConfig analysis;

  void validate() const {
    if (batch_size < 1) throw UsageError("batch_size must be >= 1");
    synthetic.validate();
    miner.validate();
    for (const auto* t : {&utterance, &history, &generator}) t->validate();
    if (utterance.hidden_size != history.hidden_size || history.hidden_size != generator.hidden_size)
      throw UsageError("utterance, history and generator hidden sizes must agree");
    generation.validate();
    if (split.train <= 0.0 || split.valid < 0.0 || split.train + split.valid >= 1.0)
      throw UsageError("split ratios must satisfy 0 < train, 0 <= valid, train + valid < 1");
    if (!corpus.empty() && !std::filesystem::exists(corpus)) throw DataError("corpus not found: " + corpus);
    if (!evaluation.word_vectors.empty() && !std::filesystem::exists(evaluation.word_vectors))
      throw DataError("word vectors not found: " + evaluation.word_vectors);
  }

  bool any_task_enabled() const { return !(disable_utt_task && disable_seq_task && disable_user_task); }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, corpus, synthetic, output_dir, seed, min_freq, max_vocab,
                                                split, miner, utterance, history, generator, encoder,
                                                generator_options, negatives, loss_weights, batch_size, pretrain_optimizer,
                                                finetune_optimizer, pretrain_epochs, finetune_epochs,
                                                max_steps_per_epoch, disable_utt_task, disable_seq_task,
                                                disable_user_task, use_pretraining, freeze_encoders, generation,
                                                evaluation, analysis)

namespace detail {

inline void check_known_keys(const nlohmann::json& given, const nlohmann::json& known, const std::string& path) {
  if (!given.is_object()) return;
  for (const auto& [key, value] : given.items()) {
    const std::string full = path.empty() ? key : path + "." + key;
    if (!known.is_object() || !known.contains(key)) throw UsageError("unknown config key: " + full);
    check_known_keys(value, known[key], full);
  }
}

}  // namespace detail

/// Sets `key=value` where key is a dotted path. The value is parsed as JSON
/// when possible and taken as a string otherwise.
inline void apply_override(nlohmann::json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  nlohmann::json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw UsageError("bad override key: " + key);
    if (!node->is_object()) *node = nlohmann::json::object();
    node = &(*node)[part];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  auto parsed = nlohmann::json::parse(raw, nullptr, false);
  *node = parsed.is_discarded() ? nlohmann::json(raw) : parsed;
}

/// Builds a config from optional JSON text plus overrides. Unknown keys are
/// rejected so that typos do not silently fall back to defaults.
inline RunConfig make_config(const nlohmann::json& base, const std::vector<std::string>& overrides = {}) {
  nlohmann::json j = base.is_null() ? nlohmann::json::object() : base;
  for (const auto& o : overrides) apply_override(j, o);
  detail::check_known_keys(j, nlohmann::json(RunConfig{}), "");
  RunConfig cfg;
  try {
    cfg = j.get<RunConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  nlohmann::json base = nlohmann::json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config " + path.string());
    base = nlohmann::json::parse(in, nullptr, false);
    if (base.is_discarded()) throw UsageError("config is not valid JSON: " + path.string());
  }
  return make_config(base, overrides);
}

}  // namespace mcp::pipeline
