#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mcp/corpus/types.hpp"
#include "mcp/mining/config.hpp"

namespace mcp::mining {

/// Two responses of one user to the same addressee within t_tilde seconds.
struct ResponsePair {
  std::string user_id;
  std::size_t position_a = 0;  // history positions, position_a < position_b
  std::size_t position_b = 0;
  std::string response_a;
  std::string response_b;
  std::string addressee_id;
  std::int64_t interval = 0;

  bool operator==(const ResponsePair&) const = default;
};

/// Two users who replied to at least s_hat common interlocutors.
struct UserPair {
  std::string user_a;
  std::string user_b;
  std::size_t shared_interlocutors = 0;

  bool operator==(const UserPair&) const = default;
};

/// All (i, j), i < j, with equal addressee and |t_i - t_j| <= t_tilde, ordered by (i, j).
/// Groups positions by addressee and sweeps a time window inside each group.
inline std::vector<ResponsePair> mine_response_pairs(const corpus::UserHistory& history, const MinerConfig& cfg) {
  std::map<std::string, std::vector<std::size_t>> by_addressee;
  for (std::size_t i = 0; i < history.triples.size(); ++i) by_addressee[history.triples[i].addressee_id].push_back(i);
  std::vector<std::pair<std::size_t, std::size_t>> hits;
  for (auto& [who, positions] : by_addressee) {
    // positions are chronological because the history is sorted by time
    for (std::size_t a = 0; a < positions.size(); ++a) {
      const auto ta = history.triples[positions[a]].timestamp;
      for (std::size_t b = a + 1; b < positions.size(); ++b) {
        if (history.triples[positions[b]].timestamp - ta > cfg.t_tilde) break;
        hits.emplace_back(positions[a], positions[b]);
      }
    }
  }
  std::sort(hits.begin(), hits.end());
  std::vector<ResponsePair> out;
  out.reserve(hits.size());
  for (auto [i, j] : hits) {
    const auto& a = history.triples[i];
    const auto& b = history.triples[j];
    out.push_back({history.user_id, i, j, a.response_text, b.response_text, a.addressee_id,
                   std::llabs(b.timestamp - a.timestamp)});
  }
  return out;
}

inline std::vector<ResponsePair> mine_response_pairs(const corpus::Corpus& corpus, const MinerConfig& cfg) {
  std::vector<ResponsePair> out;
  for (const auto& [id, h] : corpus.users) {
    auto pairs = mine_response_pairs(h, cfg);
    out.insert(out.end(), pairs.begin(), pairs.end());
  }
  return out;
}

/// Sets of addressees per user (U'_i).
inline std::map<std::string, std::set<std::string>> interlocutor_sets(const corpus::Corpus& corpus) {
  std::map<std::string, std::set<std::string>> sets;
  for (const auto& [id, h] : corpus.users)
    for (const auto& t : h.triples) sets[id].insert(t.addressee_id);
  return sets;
}

/// Candidate pairs from an inverted index addressee -> responding users. When the
/// candidates exceed the per-epoch cap, a uniform sample without replacement is
/// kept. Output is sorted by (user_a, user_b).
template <typename Rng>
std::vector<UserPair> mine_user_pairs(const corpus::Corpus& corpus, const MinerConfig& cfg, Rng& rng) {
  std::map<std::string, std::set<std::string>> responders;
  for (const auto& [id, h] : corpus.users)
    for (const auto& t : h.triples) responders[t.addressee_id].insert(id);
  std::map<std::pair<std::string, std::string>, std::size_t> shared;
  for (const auto& [who, users] : responders) {
    for (auto a = users.begin(); a != users.end(); ++a)
      for (auto b = std::next(a); b != users.end(); ++b) ++shared[{*a, *b}];
  }
  std::vector<UserPair> out;
  for (const auto& [key, count] : shared)
    if (count >= cfg.s_hat) out.push_back({key.first, key.second, count});
  if (out.size() > cfg.max_user_pairs_per_epoch) {
    std::vector<std::size_t> idx(out.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < cfg.max_user_pairs_per_epoch; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(cfg.max_user_pairs_per_epoch);
    std::sort(idx.begin(), idx.end());
    std::vector<UserPair> sampled;
    for (auto i : idx) sampled.push_back(out[i]);
    out = std::move(sampled);
  }
  return out;
}

}  // namespace mcp::mining
