#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "mcp/common.hpp"
#include "mcp/corpus/types.hpp"
#include "mcp/corpus/vocabulary.hpp"

namespace mcp::corpus {

struct IngestStats {
  std::size_t lines = 0;
  std::size_t accepted = 0;
  std::size_t skipped = 0;
};

namespace detail {

inline std::optional<DialogueTriple> parse_record(const std::string& line, std::string& why) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error&) {
    why = "not valid JSON";
    return std::nullopt;
  }
  if (!j.is_object()) {
    why = "record is not an object";
    return std::nullopt;
  }
  for (const char* f : {"user_id", "query_text", "response_text", "addressee_id"})
    if (!j.contains(f) || !j[f].is_string()) {
      why = std::string("missing or non-string field ") + f;
      return std::nullopt;
    }
  if (!j.contains("timestamp") || !j["timestamp"].is_number_integer()) {
    why = "missing or non-integer timestamp";
    return std::nullopt;
  }
  DialogueTriple t{j["user_id"], j["query_text"], j["response_text"], j["timestamp"].get<std::int64_t>(),
                   j["addressee_id"]};
  if (t.timestamp < 0) {
    why = "negative timestamp";
    return std::nullopt;
  }
  if (split_words(t.response_text).empty()) {
    why = "empty response";
    return std::nullopt;
  }
  if (t.user_id == t.addressee_id) {
    why = "user replies to self";
    return std::nullopt;
  }
  return t;
}

}  // namespace detail

/// Sorts each user's triples by timestamp (stable, so ties keep file order).
inline void sort_histories(Corpus& corpus) {
  for (auto& [id, h] : corpus.users)
    std::stable_sort(h.triples.begin(), h.triples.end(),
                     [](const DialogueTriple& a, const DialogueTriple& b) { return a.timestamp < b.timestamp; });
}

inline Corpus parse_corpus(std::istream& is, const std::string& provenance, IngestStats* stats_out = nullptr) {
  Corpus corpus;
  corpus.provenance = provenance;
  IngestStats stats;
  std::string line;
  while (std::getline(is, line)) {
    ++stats.lines;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::string why;
    auto t = detail::parse_record(line, why);
    if (!t) {
      ++stats.skipped;
      log_warn(provenance, ":", stats.lines, ": skipped record (", why, ")");
      continue;
    }
    auto& h = corpus.users[t->user_id];
    h.user_id = t->user_id;
    h.triples.push_back(std::move(*t));
    ++stats.accepted;
  }
  if (stats_out) *stats_out = stats;
  if (stats.accepted == 0) throw DataError("no valid records in " + provenance);
  sort_histories(corpus);
  return corpus;
}

inline Corpus ingest_corpus(const std::filesystem::path& path, IngestStats* stats = nullptr) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot read corpus file " + path.string());
  return parse_corpus(is, path.string(), stats);
}

inline nlohmann::json triple_to_json(const DialogueTriple& t) {
  return {{"user_id", t.user_id},
          {"query_text", t.query_text},
          {"response_text", t.response_text},
          {"timestamp", t.timestamp},
          {"addressee_id", t.addressee_id}};
}

/// One record per line, users in id order, each user's triples chronological.
inline void write_corpus(const Corpus& corpus, std::ostream& os) {
  for (const auto& [id, h] : corpus.users)
    for (const auto& t : h.triples) os << triple_to_json(t).dump() << '\n';
}

inline void write_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write corpus file " + path.string());
  write_corpus(corpus, os);
}

struct SplitRatios {
  double train = 0.8;
  double valid = 0.1;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SplitRatios, train, valid)

struct HistorySplit {
  UserHistory train, valid, test;
};

/// Chronological split: floor(train*n) earliest triples, then floor(valid*n),
/// remainder to test. Histories with fewer than 3 triples are excluded.
inline std::optional<HistorySplit> chronological_split(const UserHistory& history, SplitRatios ratios = {}) {
  const std::size_t n = history.size();
  if (n < 3) {
    log(LogLevel::kDebug, "user ", history.user_id, " has ", n, " responses; excluded from supervised splits");
    return std::nullopt;
  }
  const auto n_train = static_cast<std::size_t>(ratios.train * static_cast<double>(n) + 1e-9);
  const auto n_valid = static_cast<std::size_t>(ratios.valid * static_cast<double>(n) + 1e-9);
  HistorySplit s;
  for (auto* part : {&s.train, &s.valid, &s.test}) part->user_id = history.user_id;
  const auto& tr = history.triples;
  s.train.triples.assign(tr.begin(), tr.begin() + n_train);
  s.valid.triples.assign(tr.begin() + n_train, tr.begin() + n_train + n_valid);
  s.test.triples.assign(tr.begin() + n_train + n_valid, tr.end());
  return s;
}

}  // namespace mcp::corpus
