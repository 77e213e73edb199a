// Command-line front end: ingest, synth, mine-pairs, pretrain, finetune,
// evaluate, analyze, run-all. Exit codes: 0 ok, 1 usage, 2 data, 3 numeric.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mcp/pipeline/run.hpp"

namespace fs = std::filesystem;
using namespace mcp;

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string log_level = "info";
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config_path, "JSON run configuration");
  app->add_option("--set", c.overrides, "override a config value, e.g. --set miner.history_len=10");
  app->add_option("--log-level", c.log_level, "debug, info, warn, error or silent");
}

pipeline::RunConfig resolve(const Common& c) {
  static const std::pair<const char*, LogLevel> kLevels[] = {{"debug", LogLevel::kDebug}, {"info", LogLevel::kInfo},
                                                             {"warn", LogLevel::kWarn},   {"error", LogLevel::kError},
                                                             {"silent", LogLevel::kSilent}};
  bool found = false;
  for (const auto& [name, level] : kLevels)
    if (c.log_level == name) {
      log_threshold() = level;
      found = true;
    }
  if (!found) throw UsageError("unknown log level " + c.log_level);
  return pipeline::load_config(c.config_path, c.overrides);
}

void print_json(const nlohmann::json& j) { std::cout << j.dump(2) << std::endl; }

int run(int argc, char** argv) {
  CLI::App app{"Contrastive pre-training and personalized response generation"};
  app.require_subcommand(1);
  Common common;

  auto* ingest = app.add_subcommand("ingest", "validate a JSONL dialogue corpus and write it normalized");
  std::string ingest_in, ingest_out;
  ingest->add_option("--input", ingest_in, "raw JSONL corpus")->required();
  ingest->add_option("--output", ingest_out, "normalized JSONL output")->required();
  add_common(ingest, common);

  auto* synth = app.add_subcommand("synth", "generate the planted-topic synthetic corpus");
  std::string synth_out, synth_truth;
  synth->add_option("--output", synth_out, "JSONL corpus output")->required();
  synth->add_option("--truth", synth_truth, "ground-truth JSON output");
  add_common(synth, common);

  auto* mine = app.add_subcommand("mine-pairs", "mine response, sequence and user pairs into shards");
  std::string mine_out;
  mine->add_option("--out", mine_out, "shard directory (default: <output_dir>/pairs)");
  add_common(mine, common);

  auto* pre = app.add_subcommand("pretrain", "contrastive pre-training of the encoders");
  std::string pre_pairs;
  pre->add_option("--pairs", pre_pairs, "existing shard directory (mined afresh when omitted)");
  add_common(pre, common);

  auto* fine = app.add_subcommand("finetune", "fine-tune the generator");
  std::string fine_ckpt;
  fine->add_option("--pretrained", fine_ckpt, "pre-training checkpoint (random encoders when omitted)");
  add_common(fine, common);

  auto* eval = app.add_subcommand("evaluate", "decode the test split and compute metrics");
  std::string eval_ckpt, eval_metric = "bleu1";
  std::vector<std::string> eval_compare;
  eval->add_option("--checkpoint", eval_ckpt, "fine-tuned checkpoint (default: <output_dir>/finetune/final)");
  eval->add_option("--compare", eval_compare, "two generations files: paired t-test instead of decoding")
      ->expected(2);
  eval->add_option("--metric", eval_metric, "metric for --compare");
  add_common(eval, common);

  auto* analyze = app.add_subcommand("analyze", "PCA projections and user-similarity histograms");
  std::string an_before, an_after;
  analyze->add_option("--before", an_before, "checkpoint before training (random init when omitted)");
  analyze->add_option("--after", an_after, "checkpoint after training")->required();
  add_common(analyze, common);

  auto* all = app.add_subcommand("run-all", "every stage end to end, plus a run manifest");
  add_common(all, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  const auto cfg = resolve(common);
  const fs::path out = cfg.output_dir;

  if (ingest->parsed()) {
    corpus::IngestStats stats;
    const auto c = corpus::ingest_corpus(ingest_in, &stats);
    corpus::write_corpus(c, ingest_out);
    print_json({{"lines", stats.lines}, {"accepted", stats.accepted}, {"skipped", stats.skipped},
                {"users", c.users.size()}, {"digest", pipeline::file_digest(ingest_out)}});
  } else if (synth->parsed()) {
    const auto sc = corpus::generate_synthetic_corpus(cfg.synthetic);
    corpus::write_corpus(sc.corpus, synth_out);
    if (!synth_truth.empty()) pipeline::write_truth(sc.truth, synth_truth);
    print_json({{"users", sc.corpus.users.size()}, {"triples", sc.corpus.num_triples()},
                {"planted_pairs", sc.truth.planted_pairs.size()}});
  } else if (mine->parsed()) {
    const auto d = pipeline::prepare_dataset(cfg);
    const fs::path dir = mine_out.empty() ? out / "pairs" : fs::path(mine_out);
    const auto pairs = pipeline::mine_pairs_stage(cfg, d, dir);
    const mining::ShardPaths paths(dir);
    print_json({{"response_pairs", pairs.response.size()},
                {"sequence_pairs", pairs.sequence.size()},
                {"user_pairs", pairs.user.size()},
                {"t_tilde", pairs.config.t_tilde},
                {"t_hat", pairs.config.t_hat},
                {"digests", pipeline::tree_digests(dir)}});
  } else if (pre->parsed()) {
    const auto d = pipeline::prepare_dataset(cfg);
    const auto pairs = pre_pairs.empty() ? pipeline::mine_pairs_stage(cfg, d, out / "pairs") : mining::read_shards(pre_pairs);
    const auto r = pipeline::pretrain(cfg, d, pairs, out / "pretrain");
    print_json({{"checkpoint", r.checkpoint.string()}, {"epoch_mean_total", r.epoch_mean_total},
                {"skipped_steps", r.skipped_steps}});
  } else if (fine->parsed()) {
    const auto d = pipeline::prepare_dataset(cfg);
    std::optional<fs::path> ckpt;
    if (!fine_ckpt.empty()) ckpt = fine_ckpt;
    const auto r = pipeline::finetune(cfg, d, ckpt, out / "finetune");
    print_json({{"checkpoint", r.checkpoint.string()}, {"train_loss", r.train_loss}, {"valid_loss", r.valid_loss},
                {"best_epoch", r.best_epoch}});
  } else if (eval->parsed()) {
    const auto d = pipeline::prepare_dataset(cfg);
    if (!eval_compare.empty()) {
      const std::size_t m = metrics::MetricReport::index_of(eval_metric);
      std::vector<double> scores[2];
      for (int side = 0; side < 2; ++side) {
        const auto report = pipeline::score_generations(d, pipeline::read_generations(eval_compare[side]),
                                                        cfg.evaluation, nullptr);
        for (const auto& v : report.per_example[m]) {
          if (!v) throw DataError("metric " + eval_metric + " is undefined for some examples");
          scores[side].push_back(*v);
        }
      }
      const auto t = metrics::paired_t_test(scores[0], scores[1]);
      print_json({{"metric", eval_metric}, {"t", t.t}, {"dof", t.dof}, {"p_value", t.p_value},
                  {"mean_difference", t.mean_difference}});
    } else {
      const fs::path ckpt = eval_ckpt.empty() ? out / "finetune" / "final" : fs::path(eval_ckpt);
      const auto r = pipeline::evaluate(cfg, d, ckpt, out / "evaluate");
      print_json(metrics::to_json(r.report)["counts"]);
    }
  } else if (analyze->parsed()) {
    const auto d = pipeline::prepare_dataset(cfg);
    std::optional<fs::path> before;
    if (!an_before.empty()) before = an_before;
    const auto a = pipeline::analyze_representations(cfg, d, before, an_after, out / "analysis");
    nlohmann::json summary = {{"output", (out / "analysis" / "analysis.json").string()}};
    if (a.contains("topic_gap")) summary["topic_gap"] = a["topic_gap"];
    if (a.contains("user_separation")) summary["user_separation"] = a["user_separation"];
    print_json(summary);
  } else if (all->parsed()) {
    const auto r = pipeline::run_all(cfg);
    print_json({{"manifest", (out / "manifest.json").string()}, {"outputs", r.manifest["outputs"].size()}});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 2;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 2;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << std::endl;
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  }
}
