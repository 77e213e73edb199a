#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "mcp/pipeline/data.hpp"
#include "mcp/pipeline/model.hpp"

namespace mcp::pipeline {

struct FinetuneResult {
  std::vector<double> train_loss;  // per epoch, token-weighted
  std::vector<double> valid_loss;  // per epoch, token-weighted
  std::size_t best_epoch = 0;      // 1-based; epoch whose weights were kept
  std::size_t loaded_encoder_parameters = 0;
  std::filesystem::path checkpoint;
};

namespace detail {

inline std::size_t target_count(const GenerationExample& ex, std::size_t max_decode_len) {
  return std::min(ex.gold.size(), max_decode_len - 1) + 1;
}

}  // namespace detail

/// Teacher-forced generation loss on a batch; profiles come from each example's
/// own history window.
template <typename T>
nn::Var<T> batch_generation_loss(nn::Graph<T>& g, const Model<T>& model, const std::vector<const GenerationExample*>& batch,
                                 std::size_t max_decode_len, std::mt19937_64* rng) {
  std::vector<const std::vector<corpus::TokenIds>*> histories;
  std::vector<corpus::TokenIds> queries, golds;
  for (const auto* ex : batch) {
    histories.push_back(&ex->history);
    queries.push_back(ex->query);
    golds.push_back(ex->gold);
  }
  auto profiles = encode_profiles(g, model.encoder, histories, rng);
  return model.generator->generation_loss(g, profiles, queries, golds, max_decode_len, rng);
}

/// Token-weighted mean generation loss without gradients.
template <typename T>
double evaluation_loss(const Model<T>& model, const std::vector<GenerationExample>& examples, std::size_t batch_size,
                       std::size_t max_decode_len) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (std::size_t b = 0; b < examples.size(); b += batch_size) {
    std::vector<const GenerationExample*> batch;
    std::size_t count = 0;
    for (std::size_t i = b; i < std::min(examples.size(), b + batch_size); ++i) {
      batch.push_back(&examples[i]);
      count += detail::target_count(examples[i], max_decode_len);
    }
    nn::Graph<T> g(false);
    total += static_cast<double>(batch_generation_loss(g, model, batch, max_decode_len, nullptr)->value(0, 0)) *
             static_cast<double>(count);
    tokens += count;
  }
  return tokens == 0 ? std::numeric_limits<double>::quiet_NaN() : total / static_cast<double>(tokens);
}

/// Builds the full model, initializes the encoders from `pretrained` when
/// given, and fine-tunes on the generation loss. The weights of the epoch with
/// the lowest validation loss are kept and saved to `out_dir/final`.
template <typename T = float>
FinetuneResult finetune(const RunConfig& cfg, const Dataset& d, const std::optional<std::filesystem::path>& pretrained,
                        const std::filesystem::path& out_dir, Model<T>* model_out = nullptr) {
  if (d.vocab.size() <= corpus::Vocabulary::kNumSpecials) throw DataError("vocabulary is empty");
  const auto train = build_examples(d, Part::kTrain, cfg.miner.history_len);
  const auto valid = build_examples(d, Part::kValid, cfg.miner.history_len);
  if (train.empty()) throw DataError("no fine-tuning examples in the training split");

  std::optional<Model<T>> local;
  if (!model_out) local.emplace(cfg, d.vocab.size(), true);
  Model<T>& model = model_out ? *model_out : *local;
  FinetuneResult result;
  if (pretrained) {
    // only encoder weights are taken from a pre-training checkpoint
    nn::ParameterStore<T> enc_store(cfg.seed);
    ProfileEncoder<T> enc(enc_store, d.vocab.size(), cfg.utterance, cfg.history, cfg.encoder);
    result.loaded_encoder_parameters = nn::load_checkpoint(enc_store, *pretrained, true);
    model.store.copy_matching_from(enc_store);
    log_info("encoders initialized from ", pretrained->string(), " (", result.loaded_encoder_parameters,
             " tensors)");
  }
  if (cfg.freeze_encoders) {
    model.store.set_trainable("utt.", false);
    model.store.set_trainable("hist.", false);
  }

  nn::Adam<T> adam(cfg.finetune_optimizer);
  std::mt19937_64 rng(cfg.seed ^ 0x66696e6574756eULL);
  std::mt19937_64* drop = cfg.generator.dropout > 0 || cfg.utterance.dropout > 0 || cfg.history.dropout > 0 ? &rng : nullptr;
  const std::size_t max_len = cfg.generation.max_decode_len;

  std::filesystem::create_directories(out_dir);
  std::ofstream log_file(out_dir / "loss_log.jsonl");
  if (!log_file) throw DataError("cannot write " + (out_dir / "loss_log.jsonl").string());

  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  double best = std::numeric_limits<double>::infinity();
  std::vector<nn::Matrix<T>> best_weights;
  for (std::size_t epoch = 1; epoch <= cfg.finetune_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    std::size_t tokens = 0;
    std::size_t steps = 0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      if (cfg.max_steps_per_epoch > 0 && steps >= cfg.max_steps_per_epoch) break;
      std::vector<const GenerationExample*> batch;
      std::size_t count = 0;
      for (std::size_t i = b; i < std::min(order.size(), b + cfg.batch_size); ++i) {
        batch.push_back(&train[order[i]]);
        count += detail::target_count(train[order[i]], max_len);
      }
      nn::Graph<T> g;
      auto loss = batch_generation_loss(g, model, batch, max_len, drop);
      model.store.zero_grad();
      g.backward(loss);
      adam.step(model.store);
      total += static_cast<double>(loss->value(0, 0)) * static_cast<double>(count);
      tokens += count;
      ++steps;
    }
    result.train_loss.push_back(total / static_cast<double>(tokens));
    const double v = valid.empty() ? result.train_loss.back() : evaluation_loss(model, valid, cfg.batch_size, max_len);
    result.valid_loss.push_back(v);
    log_file << nlohmann::json{{"epoch", epoch}, {"train_loss", result.train_loss.back()}, {"valid_loss", v}}.dump()
             << '\n';
    log_info("finetune epoch ", epoch, "/", cfg.finetune_epochs, " train ", result.train_loss.back(), " valid ", v);
    if (v < best) {
      best = v;
      result.best_epoch = epoch;
      best_weights = model.snapshot();
    }
  }
  if (!best_weights.empty()) model.restore(best_weights);
  if (adam.skipped_steps() > 0) log_warn(adam.skipped_steps(), " optimizer steps skipped on non-finite gradients");
  result.checkpoint = out_dir / "final";
  nn::save_checkpoint(model.store, result.checkpoint, nlohmann::json(cfg));
  return result;
}

}  // namespace mcp::pipeline
