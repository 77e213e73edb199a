#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "mcp/mining/shards.hpp"
#include "mcp/pipeline/analysis.hpp"
#include "mcp/pipeline/evaluate.hpp"
#include "mcp/pipeline/finetune.hpp"
#include "mcp/pipeline/pretrain.hpp"

#ifndef MCP_CODE_VERSION
#define MCP_CODE_VERSION "unknown"
#endif

namespace mcp::pipeline {

/// 64-bit FNV-1a of a file's bytes, as 16 hex digits.
inline std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  std::uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

/// Digest of every regular file under `dir`, keyed by relative path.
inline nlohmann::json tree_digests(const std::filesystem::path& dir, const std::vector<std::string>& skip = {}) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  nlohmann::json out = nlohmann::json::object();
  for (const auto& f : files) {
    const auto rel = std::filesystem::relative(f, dir).generic_string();
    if (std::find(skip.begin(), skip.end(), rel) != skip.end()) continue;
    out[rel] = file_digest(f);
  }
  return out;
}

/// Mines all pair families from the training split and writes the shards.
inline mining::MinedPairs mine_pairs_stage(const RunConfig& cfg, const Dataset& d, const std::filesystem::path& dir) {
  auto pairs = mining::mine_all_pairs(d.train, cfg.miner, cfg.seed);
  mining::write_shards(pairs, dir);
  log_info("mined ", pairs.response.size(), " response pairs, ", pairs.sequence.size(), " sequence pairs, ",
           pairs.user.size(), " user pairs (t_tilde=", pairs.config.t_tilde, ", t_hat=", pairs.config.t_hat, ")");
  return pairs;
}

struct RunAllResult {
  std::optional<PretrainResult> pretrain;
  FinetuneResult finetune;
  EvaluateResult evaluation;
  nlohmann::json analysis;
  nlohmann::json manifest;
};

/// corpus -> vocabulary -> pair shards -> pre-training -> fine-tuning ->
/// evaluation -> analysis, all under cfg.output_dir, then manifest.json.
inline RunAllResult run_all(const RunConfig& cfg) {
  const std::filesystem::path out = cfg.output_dir;
  std::filesystem::create_directories(out);
  RunAllResult r;
  Dataset d = prepare_dataset(cfg);
  corpus::write_corpus(d.full, out / "corpus.jsonl");
  if (d.truth) write_truth(*d.truth, out / "truth.json");
  d.vocab.save(out / "vocab.txt");
  log_info("corpus: ", d.full.users.size(), " users, ", d.full.num_triples(), " triples; vocabulary ", d.vocab.size());

  std::optional<std::filesystem::path> pretrained;
  if (cfg.use_pretraining) {
    const auto pairs = mine_pairs_stage(cfg, d, out / "pairs");
    r.pretrain = pretrain(cfg, d, pairs, out / "pretrain");
    pretrained = r.pretrain->checkpoint;
  }
  r.finetune = finetune(cfg, d, pretrained, out / "finetune");
  r.evaluation = evaluate(cfg, d, r.finetune.checkpoint, out / "evaluate");
  // the encoders right after pre-training are what the analysis is about; without
  // pre-training the fine-tuned encoders stand in
  r.analysis = analyze_representations(cfg, d, std::nullopt, pretrained.value_or(r.finetune.checkpoint), out / "analysis");

  r.manifest["config"] = cfg;
  r.manifest["seeds"] = {{"run", cfg.seed}, {"synthetic", cfg.synthetic.seed}};
  r.manifest["code_version"] = MCP_CODE_VERSION;
  r.manifest["threads"] = 1;
  r.manifest["outputs"] = tree_digests(out, {"manifest.json"});
  std::ofstream ms(out / "manifest.json");
  if (!ms) throw DataError("cannot write manifest in " + out.string());
  ms << r.manifest.dump(2) << '\n';
  return r;
}

}  // namespace mcp::pipeline
