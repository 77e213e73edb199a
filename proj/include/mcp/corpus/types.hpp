#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mcp::corpus {

/// One reply event: `user_id` answered `query_text` (written by `addressee_id`)
/// with `response_text` at `timestamp` (seconds since epoch).
struct DialogueTriple {
  std::string user_id;
  std::string query_text;
  std::string response_text;
  std::int64_t timestamp = 0;
  std::string addressee_id;

  bool operator==(const DialogueTriple&) const = default;
};

/// A user's triples in non-decreasing timestamp order.
struct UserHistory {
  std::string user_id;
  std::vector<DialogueTriple> triples;

  std::size_t size() const { return triples.size(); }
  bool operator==(const UserHistory&) const = default;
};

struct Corpus {
  std::map<std::string, UserHistory> users;  // ordered by user id for deterministic iteration
  std::string provenance;

  std::size_t num_triples() const {
    std::size_t n = 0;
    for (const auto& [id, h] : users) n += h.size();
    return n;
  }
};

}  // namespace mcp::corpus
