#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mcp/corpus/types.hpp"
#include "mcp/corpus/vocabulary.hpp"
#include "mcp/mining/config.hpp"

namespace mcp::mining {

struct SequenceItem {
  corpus::TokenIds tokens;
  bool masked = false;
  bool padded = false;
  std::string addressee_id;
  std::int64_t timestamp = 0;
  std::size_t source_position = 0;  // index into the user's history

  bool operator==(const SequenceItem&) const = default;
};

/// A user's recent responses, chronological, padded to a fixed length.
/// Padding items are flagged separately from augmentation masks.
struct ResponseSequence {
  std::string user_id;
  std::vector<SequenceItem> items;

  std::size_t unpadded() const {
    return static_cast<std::size_t>(std::count_if(items.begin(), items.end(), [](const auto& i) { return !i.padded; }));
  }
  std::size_t unmasked() const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [](const auto& i) { return !i.padded && !i.masked; }));
  }
  bool operator==(const ResponseSequence&) const = default;
};

enum class AugmentStrategy { kSessionMask, kRandomMask, kReorder, kShortIntervalMask };

inline const char* strategy_name(AugmentStrategy s) {
  switch (s) {
    case AugmentStrategy::kSessionMask: return "session_mask";
    case AugmentStrategy::kRandomMask: return "random_mask";
    case AugmentStrategy::kReorder: return "reorder";
    case AugmentStrategy::kShortIntervalMask: return "short_interval_mask";
  }
  return "?";
}

inline AugmentStrategy strategy_from_name(const std::string& name) {
  for (auto s : {AugmentStrategy::kSessionMask, AugmentStrategy::kRandomMask, AugmentStrategy::kReorder,
                 AugmentStrategy::kShortIntervalMask})
    if (name == strategy_name(s)) return s;
  throw DataError("unknown augmentation strategy: " + name);
}

/// Builds the sequence of the `history_len` most recent responses before
/// position `end` (exclusive), padded at the tail up to `history_len`.
/// Tokens are filled when a vocabulary is given.
inline ResponseSequence make_sequence(const corpus::UserHistory& history, std::size_t end, std::size_t history_len,
                                      const corpus::Vocabulary* vocab = nullptr, bool pad = true) {
  ResponseSequence seq;
  seq.user_id = history.user_id;
  end = std::min(end, history.triples.size());
  const std::size_t begin = end > history_len ? end - history_len : 0;
  for (std::size_t i = begin; i < end; ++i) {
    const auto& t = history.triples[i];
    SequenceItem item;
    if (vocab) item.tokens = vocab->tokenize(t.response_text);
    item.addressee_id = t.addressee_id;
    item.timestamp = t.timestamp;
    item.source_position = i;
    seq.items.push_back(std::move(item));
  }
  if (pad) {
    while (seq.items.size() < history_len) {
      SequenceItem p;
      p.padded = true;
      seq.items.push_back(std::move(p));
    }
  }
  return seq;
}

namespace detail {

inline std::vector<std::size_t> unpadded_positions(const ResponseSequence& seq) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < seq.items.size(); ++i)
    if (!seq.items[i].padded) out.push_back(i);
  return out;
}

}  // namespace detail

/// Applies one augmentation strategy. Returns nullopt when the strategy's
/// precondition does not hold for this sequence.
template <typename Rng>
std::optional<ResponseSequence> augment_history(const ResponseSequence& seq, AugmentStrategy strategy,
                                                const MinerConfig& cfg, Rng& rng) {
  const auto pos = detail::unpadded_positions(seq);
  const std::size_t n = pos.size();
  if (n < 2) return std::nullopt;
  ResponseSequence out = seq;

  switch (strategy) {
    case AugmentStrategy::kSessionMask: {
      std::map<std::string, std::size_t> counts;
      for (auto p : pos) ++counts[seq.items[p].addressee_id];
      if (counts.size() < 2) return std::nullopt;
      std::vector<std::string> candidates;
      for (const auto& [who, c] : counts)
        if (c < n) candidates.push_back(who);
      const auto& chosen = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
      for (auto p : pos)
        if (seq.items[p].addressee_id == chosen) out.items[p].masked = true;
      return out;
    }
    case AugmentStrategy::kRandomMask: {
      auto m = static_cast<std::size_t>(std::lround(cfg.k_percent / 100.0 * static_cast<double>(n)));
      m = std::min(m, n - 1);
      std::vector<std::size_t> shuffled = pos;
      for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(shuffled[i], shuffled[pick(rng)]);
        out.items[shuffled[i]].masked = true;
      }
      return out;
    }
    case AugmentStrategy::kReorder: {
      const std::size_t swaps = cfg.num_swaps > 0 ? cfg.num_swaps : std::max<std::size_t>(1, n / 10);
      auto cross_pairs = [&]() {
        std::vector<std::pair<std::size_t, std::size_t>> pairs;
        for (std::size_t a = 0; a < n; ++a)
          for (std::size_t b = a + 1; b < n; ++b)
            if (out.items[pos[a]].addressee_id != out.items[pos[b]].addressee_id) pairs.emplace_back(pos[a], pos[b]);
        return pairs;
      };
      if (cross_pairs().empty()) return std::nullopt;
      for (std::size_t s = 0; s < swaps; ++s) {
        const auto pairs = cross_pairs();
        const auto [a, b] = pairs[std::uniform_int_distribution<std::size_t>(0, pairs.size() - 1)(rng)];
        std::swap(out.items[a], out.items[b]);
      }
      return out;
    }
    case AugmentStrategy::kShortIntervalMask: {
      const std::size_t cap = n - (n + 1) / 2;  // keep at least ceil(n/2) unmasked
      std::size_t masked = 0;
      bool any = false;
      for (std::size_t k = 1; k < n; ++k) {
        if (seq.items[pos[k]].timestamp - seq.items[pos[k - 1]].timestamp > cfg.t_hat) continue;
        any = true;
        if (masked < cap) {
          out.items[pos[k]].masked = true;
          ++masked;
        }
      }
      if (!any) return std::nullopt;
      return out;
    }
  }
  return std::nullopt;
}

/// Draws one strategy uniformly; if inapplicable, falls back through
/// random_mask, reorder, session_mask, short_interval_mask in that order.
template <typename Rng>
std::optional<std::pair<ResponseSequence, AugmentStrategy>> augment_with_fallback(const ResponseSequence& seq,
                                                                                  const MinerConfig& cfg, Rng& rng) {
  static constexpr AugmentStrategy kAll[] = {AugmentStrategy::kSessionMask, AugmentStrategy::kRandomMask,
                                             AugmentStrategy::kReorder, AugmentStrategy::kShortIntervalMask};
  static constexpr AugmentStrategy kFallback[] = {AugmentStrategy::kRandomMask, AugmentStrategy::kReorder,
                                                  AugmentStrategy::kSessionMask, AugmentStrategy::kShortIntervalMask};
  const AugmentStrategy first = kAll[std::uniform_int_distribution<int>(0, 3)(rng)];
  if (auto r = augment_history(seq, first, cfg, rng)) return std::make_pair(std::move(*r), first);
  for (auto s : kFallback) {
    if (s == first) continue;
    if (auto r = augment_history(seq, s, cfg, rng)) return std::make_pair(std::move(*r), s);
  }
  return std::nullopt;
}

}  // namespace mcp::mining
