#pragma once
// Random and hand-built inputs shared by the unit tests and the acceptance run.

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mcp/corpus/io.hpp"
#include "mcp/corpus/types.hpp"

namespace fixtures {

inline mcp::corpus::DialogueTriple triple(const std::string& user, const std::string& to, std::int64_t t,
                                          const std::string& response = "hello there") {
  return {user, "what now", response, t, to};
}

inline mcp::corpus::UserHistory history(const std::string& user,
                                        const std::vector<std::pair<std::string, std::int64_t>>& events) {
  mcp::corpus::UserHistory h{user, {}};
  for (const auto& [to, t] : events) h.triples.push_back(triple(user, to, t, "r" + std::to_string(h.size())));
  return h;
}

// Up to `max_users` users with up to `max_responses` responses each. Small
// addressee pools and clustered timestamps so that every pairing rule binds
// (including ties and the inclusive time bound).
inline mcp::corpus::Corpus random_corpus(std::mt19937_64& rng, std::size_t max_users = 50,
                                         std::size_t max_responses = 200) {
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  mcp::corpus::Corpus c;
  const std::size_t users = pick(1, max_users);
  const std::size_t pool = pick(1, 12);
  for (std::size_t u = 0; u < users; ++u) {
    const std::string id = "u" + std::to_string(u);
    mcp::corpus::UserHistory h{id, {}};
    const std::size_t n = pick(1, max_responses);
    std::int64_t t = static_cast<std::int64_t>(pick(0, 1000));
    for (std::size_t i = 0; i < n; ++i) {
      t += static_cast<std::int64_t>(pick(0, 3) == 0 ? pick(0, 5000) : pick(0, 40));
      h.triples.push_back(triple(id, "a" + std::to_string(pick(0, pool - 1)), t, "w" + std::to_string(i)));
    }
    c.users[id] = std::move(h);
  }
  return c;
}

}  // namespace fixtures
