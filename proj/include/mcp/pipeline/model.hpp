#pragma once

#include <map>
#include <memory>
#include <optional>
#include <vector>

#include "mcp/encoders.hpp"
#include "mcp/generator.hpp"
#include "mcp/pipeline/config.hpp"

namespace mcp::pipeline {

/// Encoders and (optionally) the generator in one parameter store. The
/// encoders are registered first, so their random initialization is the same
/// whether or not a generator follows.
template <typename T>
struct Model {
  nn::ParameterStore<T> store;
  ProfileEncoder<T> encoder;
  std::optional<Generator<T>> generator;

  Model(const RunConfig& cfg, std::size_t vocab_size, bool with_generator)
      : store(cfg.seed), encoder(store, vocab_size, cfg.utterance, cfg.history, cfg.encoder) {
    if (with_generator) generator.emplace(store, vocab_size, cfg.generator, cfg.generator_options);
  }

  std::vector<nn::Matrix<T>> snapshot() const {
    std::vector<nn::Matrix<T>> out;
    for (const auto& [name, p] : store.entries()) out.push_back(p->value);
    return out;
  }

  void restore(const std::vector<nn::Matrix<T>>& values) {
    const auto& entries = store.entries();
    for (std::size_t i = 0; i < entries.size(); ++i) entries[i].second->value = values[i];
  }
};

inline bool is_encoder_parameter(const std::string& name) {
  return name.rfind("utt.", 0) == 0 || name.rfind("hist.", 0) == 0;
}

/// One profile row per history (a list of tokenized responses, oldest first).
/// Identical responses across the batch are encoded once.
template <typename T>
nn::Var<T> encode_profiles(nn::Graph<T>& g, const ProfileEncoder<T>& enc,
                           const std::vector<const std::vector<corpus::TokenIds>*>& histories,
                           std::mt19937_64* rng = nullptr) {
  std::map<corpus::TokenIds, long> row_of;
  std::vector<corpus::TokenIds> utterances;
  std::vector<HistorySlots> slots(histories.size());
  for (std::size_t h = 0; h < histories.size(); ++h)
    for (const auto& toks : *histories[h]) {
      auto [it, inserted] = row_of.try_emplace(toks, static_cast<long>(utterances.size()));
      if (inserted) utterances.push_back(toks);
      slots[h].rows.push_back(it->second);
    }
  return enc.encode_histories(g, enc.encode_utterances(g, utterances, rng), slots, rng);
}

}  // namespace mcp::pipeline
