#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcp/corpus/io.hpp"
#include "mcp/corpus/synthetic.hpp"
#include "mcp/corpus/vocabulary.hpp"
#include "mcp/metrics/overlap.hpp"
#include "mcp/pipeline/config.hpp"

namespace mcp::pipeline {

/// Corpus, chronological splits and vocabulary shared by every stage.
struct Dataset {
  corpus::Corpus full;
  corpus::Corpus train;  // train split per user; users too short to split keep their whole history
  std::map<std::string, corpus::HistorySplit> splits;
  corpus::Vocabulary vocab;
  std::optional<corpus::SyntheticTruth> truth;
};

inline corpus::Corpus load_or_generate_corpus(const RunConfig& cfg, std::optional<corpus::SyntheticTruth>* truth) {
  if (!cfg.corpus.empty()) {
    corpus::IngestStats stats;
    auto c = corpus::ingest_corpus(cfg.corpus, &stats);
    log_info("ingested ", c.num_triples(), " triples from ", c.users.size(), " users (", stats.skipped, " skipped)");
    return c;
  }
  auto sc = corpus::generate_synthetic_corpus(cfg.synthetic);
  if (truth) *truth = std::move(sc.truth);
  return std::move(sc.corpus);
}

inline Dataset make_dataset(corpus::Corpus full, const RunConfig& cfg) {
  Dataset d;
  d.full = std::move(full);
  d.train.provenance = d.full.provenance;
  for (const auto& [id, h] : d.full.users) {
    if (auto s = corpus::chronological_split(h, cfg.split)) {
      d.train.users[id] = s->train;
      d.splits.emplace(id, std::move(*s));
    } else {
      d.train.users[id] = h;
    }
  }
  d.vocab = corpus::build_vocabulary(d.train, cfg.min_freq, cfg.max_vocab);
  return d;
}

inline Dataset prepare_dataset(const RunConfig& cfg) {
  std::optional<corpus::SyntheticTruth> truth;
  auto d = make_dataset(load_or_generate_corpus(cfg, &truth), cfg);
  d.truth = std::move(truth);
  return d;
}

enum class Part { kTrain, kValid, kTest };

inline const char* part_name(Part p) {
  switch (p) {
    case Part::kTrain: return "train";
    case Part::kValid: return "valid";
    case Part::kTest: return "test";
  }
  return "?";
}

/// One generation example: the query a user answered, their gold response and
/// the responses they wrote strictly before it (most recent history_len).
struct GenerationExample {
  std::string user_id;
  std::size_t position = 0;  // index into the user's full history
  std::string query_text;
  std::string gold_text;
  corpus::TokenIds query;
  corpus::TokenIds gold;
  std::vector<corpus::TokenIds> history;
};

/// Examples for one split part. Examples with no preceding response (or an
/// empty tokenized query) are skipped.
inline std::vector<GenerationExample> build_examples(const Dataset& d, Part part, std::size_t history_len) {
  std::vector<GenerationExample> out;
  std::size_t skipped = 0;
  for (const auto& [id, split] : d.splits) {
    const auto& triples = d.full.users.at(id).triples;
    std::size_t lo = 0, hi = split.train.size();
    if (part != Part::kTrain) {
      lo = hi;
      hi += split.valid.size();
    }
    if (part == Part::kTest) {
      lo = hi;
      hi = triples.size();
    }
    for (std::size_t i = lo; i < hi; ++i) {
      const auto& t = triples[i];
      std::vector<std::size_t> before;
      for (std::size_t j = 0; j < i; ++j)
        if (triples[j].timestamp < t.timestamp) before.push_back(j);
      if (before.size() > history_len) before.erase(before.begin(), before.end() - static_cast<std::ptrdiff_t>(history_len));
      GenerationExample ex{id, i, t.query_text, t.response_text, d.vocab.tokenize(t.query_text),
                           d.vocab.tokenize(t.response_text), {}};
      if (before.empty() || ex.query.empty() || ex.gold.empty()) {
        ++skipped;
        continue;
      }
      for (auto j : before) ex.history.push_back(d.vocab.tokenize(triples[j].response_text));
      out.push_back(std::move(ex));
    }
  }
  if (skipped > 0) log(LogLevel::kDebug, skipped, " ", part_name(part), " examples skipped (no preceding history)");
  return out;
}

/// Word tokens of each user's training responses, for persona metrics and idf.
inline std::map<std::string, std::vector<metrics::Tokens>> training_responses(const Dataset& d) {
  std::map<std::string, std::vector<metrics::Tokens>> out;
  for (const auto& [id, h] : d.train.users)
    for (const auto& t : h.triples) out[id].push_back(corpus::split_words(t.response_text));
  return out;
}

inline void write_truth(const corpus::SyntheticTruth& truth, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  os << nlohmann::json(truth).dump(2) << '\n';
}

}  // namespace mcp::pipeline
