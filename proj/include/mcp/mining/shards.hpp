#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcp/corpus/types.hpp"
#include "mcp/mining/augmentation.hpp"
#include "mcp/mining/pairs.hpp"
#include "mcp/mining/quantiles.hpp"

namespace mcp::mining {

/// An original/augmented history pair, stored by history positions so that it
/// can be rebuilt against any vocabulary.
struct SequencePairRecord {
  std::string user_id;
  std::vector<std::size_t> positions;            // original window, chronological
  std::vector<std::size_t> augmented_positions;  // same multiset, augmented order
  std::vector<std::uint8_t> augmented_masked;
  AugmentStrategy strategy = AugmentStrategy::kRandomMask;

  bool operator==(const SequencePairRecord&) const = default;
};

struct MinedPairs {
  MinerConfig config;  // with resolved thresholds
  std::uint64_t seed = 0;
  std::vector<ResponsePair> response;
  std::vector<SequencePairRecord> sequence;
  std::vector<UserPair> user;
};

inline SequencePairRecord to_record(const ResponseSequence& original, const ResponseSequence& augmented,
                                    AugmentStrategy strategy) {
  SequencePairRecord r;
  r.user_id = original.user_id;
  for (const auto& it : original.items)
    if (!it.padded) r.positions.push_back(it.source_position);
  for (const auto& it : augmented.items)
    if (!it.padded) {
      r.augmented_positions.push_back(it.source_position);
      r.augmented_masked.push_back(it.masked ? 1 : 0);
    }
  r.strategy = strategy;
  return r;
}

/// Rebuilds the (original, augmented) sequences of a record, unpadded.
inline std::pair<ResponseSequence, ResponseSequence> rebuild_sequences(const SequencePairRecord& r,
                                                                       const corpus::UserHistory& history,
                                                                       const corpus::Vocabulary& vocab) {
  auto item = [&](std::size_t pos, bool masked) {
    if (pos >= history.triples.size()) throw DataError("sequence pair refers past the end of " + r.user_id);
    const auto& t = history.triples[pos];
    return SequenceItem{vocab.tokenize(t.response_text), masked, false, t.addressee_id, t.timestamp, pos};
  };
  ResponseSequence a{r.user_id, {}}, b{r.user_id, {}};
  for (auto p : r.positions) a.items.push_back(item(p, false));
  for (std::size_t i = 0; i < r.augmented_positions.size(); ++i)
    b.items.push_back(item(r.augmented_positions[i], r.augmented_masked[i] != 0));
  return {std::move(a), std::move(b)};
}

/// Mines all three pair families. Thresholds are resolved from `corpus`
/// quantiles when unset. Augmented views are windows of up to history_len
/// responses ending at a uniformly drawn position.
inline MinedPairs mine_all_pairs(const corpus::Corpus& corpus, MinerConfig cfg, std::uint64_t seed) {
  MinedPairs out;
  out.config = resolve_thresholds(cfg, corpus);
  out.seed = seed;
  std::mt19937_64 rng(seed);
  out.response = mine_response_pairs(corpus, out.config);
  for (const auto& [id, h] : corpus.users) {
    if (h.size() < 2) continue;
    for (std::size_t v = 0; v < out.config.views_per_user; ++v) {
      const std::size_t end = std::uniform_int_distribution<std::size_t>(2, h.size())(rng);
      const auto seq = make_sequence(h, end, out.config.history_len, nullptr, false);
      if (auto aug = augment_with_fallback(seq, out.config, rng))
        out.sequence.push_back(to_record(seq, aug->first, aug->second));
    }
  }
  out.user = mine_user_pairs(corpus, out.config, rng);
  return out;
}

inline nlohmann::json to_json(const ResponsePair& p, std::uint64_t seed) {
  return {{"pair_type", "response"},
          {"user_id", p.user_id},
          {"addressee_id", p.addressee_id},
          {"response_a", p.response_a},
          {"response_b", p.response_b},
          {"interval", p.interval},
          {"provenance", {{"user_ids", {p.user_id}}, {"positions", {p.position_a, p.position_b}}, {"seed", seed}}}};
}

inline nlohmann::json to_json(const SequencePairRecord& r, std::uint64_t seed) {
  return {{"pair_type", "sequence"},
          {"user_id", r.user_id},
          {"strategy", strategy_name(r.strategy)},
          {"augmented_positions", r.augmented_positions},
          {"augmented_masked", r.augmented_masked},
          {"provenance", {{"user_ids", {r.user_id}}, {"positions", r.positions}, {"seed", seed}}}};
}

inline nlohmann::json to_json(const UserPair& p, std::uint64_t seed) {
  return {{"pair_type", "user"},
          {"user_a", p.user_a},
          {"user_b", p.user_b},
          {"shared_interlocutors", p.shared_interlocutors},
          {"provenance", {{"user_ids", {p.user_a, p.user_b}}, {"positions", nlohmann::json::array()}, {"seed", seed}}}};
}

struct ShardPaths {
  std::filesystem::path response, sequence, user, meta;

  explicit ShardPaths(const std::filesystem::path& dir)
      : response(dir / "response_pairs.jsonl"),
        sequence(dir / "sequence_pairs.jsonl"),
        user(dir / "user_pairs.jsonl"),
        meta(dir / "mining.json") {}
};

/// Writes one JSON Lines shard per pair family plus a small metadata file.
inline void write_shards(const MinedPairs& pairs, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const ShardPaths paths(dir);
  auto dump = [&](const auto& items, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write shard " + path.string());
    for (const auto& it : items) os << to_json(it, pairs.seed).dump() << '\n';
  };
  dump(pairs.response, paths.response);
  dump(pairs.sequence, paths.sequence);
  dump(pairs.user, paths.user);
  std::ofstream meta(paths.meta);
  meta << nlohmann::json{{"config", pairs.config},
                         {"seed", pairs.seed},
                         {"counts",
                          {{"response", pairs.response.size()},
                           {"sequence", pairs.sequence.size()},
                           {"user", pairs.user.size()}}}}
              .dump(2)
       << '\n';
}

inline MinedPairs read_shards(const std::filesystem::path& dir) {
  const ShardPaths paths(dir);
  std::ifstream ms(paths.meta);
  if (!ms) throw DataError("pair shards not found in " + dir.string());
  const auto meta = nlohmann::json::parse(ms);
  MinedPairs out;
  out.config = meta.at("config").get<MinerConfig>();
  out.seed = meta.at("seed").get<std::uint64_t>();
  auto each_line = [](const std::filesystem::path& path, auto&& fn) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read shard " + path.string());
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) fn(nlohmann::json::parse(line));
  };
  each_line(paths.response, [&](const nlohmann::json& j) {
    const auto& pos = j.at("provenance").at("positions");
    out.response.push_back({j.at("user_id"), pos[0].get<std::size_t>(), pos[1].get<std::size_t>(), j.at("response_a"),
                            j.at("response_b"), j.at("addressee_id"), j.at("interval").get<std::int64_t>()});
  });
  each_line(paths.sequence, [&](const nlohmann::json& j) {
    SequencePairRecord r;
    r.user_id = j.at("user_id");
    r.positions = j.at("provenance").at("positions").get<std::vector<std::size_t>>();
    r.augmented_positions = j.at("augmented_positions").get<std::vector<std::size_t>>();
    r.augmented_masked = j.at("augmented_masked").get<std::vector<std::uint8_t>>();
    r.strategy = strategy_from_name(j.at("strategy"));
    out.sequence.push_back(std::move(r));
  });
  each_line(paths.user, [&](const nlohmann::json& j) {
    out.user.push_back({j.at("user_a"), j.at("user_b"), j.at("shared_interlocutors").get<std::size_t>()});
  });
  return out;
}

}  // namespace mcp::mining
