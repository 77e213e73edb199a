#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "mcp/metrics/report.hpp"
#include "mcp/pipeline/data.hpp"
#include "mcp/pipeline/finetune.hpp"
#include "mcp/pipeline/model.hpp"

namespace mcp::pipeline {

struct GenerationRecord {
  std::string user_id;
  std::size_t position = 0;
  std::string query;
  std::string reference;
  std::string generated;
  double log_prob = 0.0;
  double score = 0.0;  // beam score (length-normalized log_prob when alpha > 0)
  bool finished = false;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenerationRecord, user_id, position, query, reference, generated,
                                                log_prob, score, finished)

/// Beam-decodes every example with the profile of its own history window.
template <typename T>
std::vector<GenerationRecord> generate_responses(const Model<T>& model, const corpus::Vocabulary& vocab,
                                                 const std::vector<GenerationExample>& examples,
                                                 const GenerationConfig& gen) {
  std::vector<GenerationRecord> out;
  for (const auto& ex : examples) {
    nn::Graph<T> g(false);
    auto profile = encode_profiles(g, model.encoder, {&ex.history});
    auto mem = model.generator->encode_context(g, profile, {ex.query});
    const auto hyp = model.generator->generate(mem, 0, gen);
    out.push_back({ex.user_id, ex.position, ex.query_text, ex.gold_text, vocab.detokenize(hyp.tokens), hyp.log_prob,
                   hyp.score, hyp.finished});
  }
  return out;
}

/// Word vectors taken from the generator's input embedding table.
template <typename T>
metrics::WordVectors embedding_word_vectors(const Model<T>& model, const corpus::Vocabulary& vocab) {
  metrics::WordVectors wv;
  const auto& table = model.store.get("gen.embedding")->value;
  for (std::size_t id = corpus::Vocabulary::kNumSpecials; id < vocab.size(); ++id) {
    const auto row = table.row(id);
    wv.add(vocab.token(static_cast<corpus::TokenId>(id)), std::vector<double>(row.begin(), row.end()));
  }
  return wv;
}

/// Scores generated texts against references; persona metrics use each user's
/// training responses, idf is computed over all training responses.
inline metrics::MetricReport score_generations(const Dataset& d, const std::vector<GenerationRecord>& gens,
                                               const EvaluationConfig& ecfg, const metrics::WordVectors* wv) {
  const auto history = training_responses(d);
  std::vector<metrics::Tokens> docs;
  for (const auto& [id, responses] : history) docs.insert(docs.end(), responses.begin(), responses.end());
  const auto idf = metrics::IdfTable::build(docs);
  std::vector<metrics::MetricExample> examples;
  for (const auto& r : gens) {
    auto it = history.find(r.user_id);
    if (it == history.end() || it->second.empty()) throw DataError("no training history for user " + r.user_id);
    examples.push_back({corpus::split_words(r.generated), corpus::split_words(r.reference), it->second});
  }
  metrics::MetricSettings settings;
  settings.stopwords = std::set<std::string>(ecfg.stopwords.begin(), ecfg.stopwords.end());
  settings.word_vectors = wv;
  settings.idf = &idf;
  return metrics::evaluate_examples(examples, settings);
}

struct EvaluateResult {
  metrics::MetricReport report;
  std::vector<GenerationRecord> generations;
};

inline void write_generations(const std::vector<GenerationRecord>& gens, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot write " + path.string());
  for (const auto& g : gens) os << nlohmann::json(g).dump() << '\n';
}

inline std::vector<GenerationRecord> read_generations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open generations file " + path.string());
  std::vector<GenerationRecord> out;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) out.push_back(nlohmann::json::parse(line).get<GenerationRecord>());
  return out;
}

/// Loads a fine-tuned checkpoint, decodes the test split and writes
/// `generations.jsonl` and `report.json` under `out_dir`.
template <typename T = float>
EvaluateResult evaluate(const RunConfig& cfg, const Dataset& d, const std::filesystem::path& checkpoint,
                        const std::filesystem::path& out_dir) {
  const auto test = build_examples(d, Part::kTest, cfg.miner.history_len);
  if (test.empty()) throw DataError("test split is empty");
  Model<T> model(cfg, d.vocab.size(), true);
  nn::load_checkpoint(model.store, checkpoint, true);
  EvaluateResult r;
  r.generations = generate_responses(model, d.vocab, test, cfg.generation);
  metrics::WordVectors wv = cfg.evaluation.word_vectors.empty() ? embedding_word_vectors(model, d.vocab)
                                                                 : metrics::WordVectors::load(cfg.evaluation.word_vectors);
  r.report = score_generations(d, r.generations, cfg.evaluation, &wv);
  std::filesystem::create_directories(out_dir);
  write_generations(r.generations, out_dir / "generations.jsonl");
  std::ofstream os(out_dir / "report.json");
  if (!os) throw DataError("cannot write report in " + out_dir.string());
  os << metrics::to_json(r.report).dump(2) << '\n';
  for (const char* m : metrics::kMetricNames) {
    const auto v = r.report.mean(m);
    log_info("  ", m, " = ", v ? std::to_string(*v) : std::string("n/a"));
  }
  return r;
}

}  // namespace mcp::pipeline
