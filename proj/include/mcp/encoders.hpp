#pragma once

#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcp/corpus/vocabulary.hpp"
#include "mcp/mining/augmentation.hpp"
#include "mcp/numeric/transformer.hpp"

namespace mcp {

struct EncoderOptions {
  bool joint_encoder_grad = true;     // history/user losses reach the utterance encoder
  bool no_utterance_encoder = false;  // utterance vector = mean of word embeddings
  bool no_history_encoder = false;    // profile = mean of utterance vectors
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EncoderOptions, joint_encoder_grad, no_utterance_encoder,
                                                no_history_encoder)

/// One history fed to the history encoder. Each slot refers to a row of the
/// utterance-vector matrix, or is masked (learned mask vector) or padding.
struct HistorySlots {
  static constexpr long kMasked = -1;
  static constexpr long kPadded = -2;
  std::vector<long> rows;
};

/// Utterance encoder (response -> vector) and history encoder (sequence of
/// utterance vectors -> user profile), both mean-pooled.
template <typename T>
class ProfileEncoder {
 public:
  using V = nn::Var<T>;

  ProfileEncoder(nn::ParameterStore<T>& store, std::size_t vocab_size, const nn::TransformerConfig& utterance_cfg,
                 const nn::TransformerConfig& history_cfg, EncoderOptions options = {})
      : utt_cfg_(utterance_cfg),
        hist_cfg_(history_cfg),
        options_(options),
        embedding_(store.add_uniform("utt.embedding", vocab_size, utterance_cfg.hidden_size, utterance_cfg.hidden_size)),
        utterance_(store, "utt", utterance_cfg, false),
        mask_vector_(store.add_uniform("hist.mask_vector", 1, history_cfg.hidden_size, history_cfg.hidden_size)),
        history_(store, "hist", history_cfg, false) {
    if (utterance_cfg.hidden_size != history_cfg.hidden_size)
      throw UsageError("utterance and history encoders must share hidden_size");
  }

  std::size_t hidden_size() const { return utt_cfg_.hidden_size; }
  const EncoderOptions& options() const { return options_; }

  /// One row per utterance. PAD tokens are padding (excluded from attention and
  /// the mean); utterances are truncated to max positions keeping the head; an
  /// empty utterance is encoded as a single MASK token.
  V encode_utterances(nn::Graph<T>& g, const std::vector<corpus::TokenIds>& utterances,
                      std::mt19937_64* rng = nullptr) const {
    if (utterances.empty()) throw NumericError("encode_utterances: empty batch");
    std::vector<std::size_t> ids;
    nn::PackedLayout layout;
    for (const auto& u : utterances) {
      corpus::TokenIds toks(u.begin(), u.begin() + std::min(u.size(), utt_cfg_.max_positions));
      bool any_real = std::any_of(toks.begin(), toks.end(), [](int t) { return t != corpus::Vocabulary::kPad; });
      if (!any_real) {
        log(LogLevel::kDebug, "empty utterance encoded as <mask>");
        toks = {corpus::Vocabulary::kMask};
      }
      std::vector<std::uint8_t> valid;
      for (int t : toks) {
        ids.push_back(static_cast<std::size_t>(t));
        valid.push_back(t != corpus::Vocabulary::kPad);
      }
      layout.push(valid);
    }
    V x = g.gather_rows(embedding_, ids);
    if (!options_.no_utterance_encoder) {
      x = g.add(x, g.constant(nn::packed_positions<T>(layout, utt_cfg_.hidden_size, utt_cfg_.max_positions)));
      x = utterance_.encode(g, x, layout, rng);
    }
    return g.segment_mean(x, layout.segments, layout.valid);
  }

  /// One profile row per history.
  V encode_histories(nn::Graph<T>& g, V utterance_vectors, const std::vector<HistorySlots>& histories,
                     std::mt19937_64* rng = nullptr) const {
    if (histories.empty()) throw NumericError("encode_histories: empty batch");
    if (!options_.joint_encoder_grad) utterance_vectors = g.detach(utterance_vectors);
    const std::size_t mask_row = utterance_vectors->value.rows;
    V table = g.concat_rows({utterance_vectors, mask_vector_});
    std::vector<std::size_t> gather;
    nn::PackedLayout layout;
    for (std::size_t h = 0; h < histories.size(); ++h) {
      std::vector<std::uint8_t> valid;
      for (long r : histories[h].rows) {
        if (r >= static_cast<long>(mask_row)) throw NumericError("history slot refers past the utterance batch");
        gather.push_back(r >= 0 ? static_cast<std::size_t>(r) : mask_row);
        valid.push_back(r != HistorySlots::kPadded);
      }
      if (std::none_of(valid.begin(), valid.end(), [](auto v) { return v != 0; }))
        throw NumericError("history " + std::to_string(h) + " has no unpadded positions");
      layout.push(valid);
    }
    V x = g.gather_rows(table, gather);
    if (!options_.no_history_encoder) {
      x = g.add(x, g.constant(nn::packed_positions<T>(layout, hist_cfg_.hidden_size, hist_cfg_.max_positions)));
      x = history_.encode(g, x, layout, rng);
    }
    return g.segment_mean(x, layout.segments, layout.valid);
  }

  /// Encodes whole response sequences. Identical utterances are encoded once.
  V encode_sequences(nn::Graph<T>& g, const std::vector<const mining::ResponseSequence*>& seqs,
                     std::mt19937_64* rng = nullptr) const {
    std::map<corpus::TokenIds, long> row_of;
    std::vector<corpus::TokenIds> utterances;
    std::vector<HistorySlots> slots(seqs.size());
    for (std::size_t s = 0; s < seqs.size(); ++s)
      for (const auto& item : seqs[s]->items) {
        if (item.padded) {
          slots[s].rows.push_back(HistorySlots::kPadded);
        } else if (item.masked) {
          slots[s].rows.push_back(HistorySlots::kMasked);
        } else {
          auto [it, inserted] = row_of.try_emplace(item.tokens, static_cast<long>(utterances.size()));
          if (inserted) utterances.push_back(item.tokens);
          slots[s].rows.push_back(it->second);
        }
      }
    if (utterances.empty()) utterances.push_back({});  // only masked slots: the mask vector carries the history
    return encode_histories(g, encode_utterances(g, utterances, rng), slots, rng);
  }

 private:
  nn::TransformerConfig utt_cfg_;
  nn::TransformerConfig hist_cfg_;
  EncoderOptions options_;
  V embedding_;
  nn::TransformerStack<T> utterance_;
  V mask_vector_;
  nn::TransformerStack<T> history_;
};

}  // namespace mcp
