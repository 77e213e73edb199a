#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <vector>

#include "mcp/mining/shards.hpp"
#include "mcp/objectives.hpp"
#include "mcp/pipeline/data.hpp"
#include "mcp/pipeline/model.hpp"

namespace mcp::pipeline {

struct PretrainResult {
  std::vector<LossReport> steps;
  std::vector<double> epoch_mean_total;
  std::filesystem::path checkpoint;  // final epoch
  std::uint64_t skipped_steps = 0;
};

namespace detail {

/// Endless shuffled pass over [0, n): reshuffles each time it wraps.
class BatchCycler {
 public:
  explicit BatchCycler(std::size_t n) : order_(n) {
    for (std::size_t i = 0; i < n; ++i) order_[i] = i;
    cursor_ = n;
  }

  std::vector<std::size_t> next(std::size_t k, std::mt19937_64& rng) {
    std::vector<std::size_t> out;
    k = std::min(k, order_.size());
    while (out.size() < k) {
      if (cursor_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng);
        cursor_ = 0;
      }
      out.push_back(order_[cursor_++]);
    }
    return out;
  }

  std::size_t size() const { return order_.size(); }

 private:
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
};

template <typename T>
nn::Var<T> split_contrastive(nn::Graph<T>& g, const nn::Var<T>& rows, std::size_t half, NegativeMode mode) {
  return contrastive_loss(g, g.slice_rows(rows, 0, half), g.slice_rows(rows, half, half), mode);
}

}  // namespace detail

/// Weighted sum of the enabled contrastive terms on one mixed batch. The
/// report carries the unweighted terms.
template <typename T>
struct PretrainStep {
  nn::Var<T> loss;
  LossReport report;
};

template <typename T>
PretrainStep<T> pretrain_step(nn::Graph<T>& g, const ProfileEncoder<T>& enc, const RunConfig& cfg, const Dataset& d,
                              const mining::MinedPairs& pairs, const std::vector<std::size_t>& utt_idx,
                              const std::vector<std::size_t>& seq_idx, const std::vector<std::size_t>& user_idx,
                              std::mt19937_64& rng) {
  std::vector<nn::Var<T>> terms;
  std::vector<T> weights;
  std::optional<double> l_utt, l_seq, l_user;
  std::mt19937_64* drop = cfg.utterance.dropout > 0 || cfg.history.dropout > 0 ? &rng : nullptr;
  if (!utt_idx.empty()) {
    std::vector<corpus::TokenIds> utts(2 * utt_idx.size());
    for (std::size_t i = 0; i < utt_idx.size(); ++i) {
      const auto& p = pairs.response[utt_idx[i]];
      utts[i] = d.vocab.tokenize(p.response_a);
      utts[utt_idx.size() + i] = d.vocab.tokenize(p.response_b);
    }
    auto loss = detail::split_contrastive(g, enc.encode_utterances(g, utts, drop), utt_idx.size(), cfg.negatives);
    l_utt = static_cast<double>(loss->value(0, 0));
    terms.push_back(loss);
    weights.push_back(static_cast<T>(cfg.loss_weights.utt));
  }
  if (!seq_idx.empty()) {
    std::vector<mining::ResponseSequence> seqs(2 * seq_idx.size());
    for (std::size_t i = 0; i < seq_idx.size(); ++i) {
      const auto& r = pairs.sequence[seq_idx[i]];
      auto [a, b] = mining::rebuild_sequences(r, d.train.users.at(r.user_id), d.vocab);
      seqs[i] = std::move(a);
      seqs[seq_idx.size() + i] = std::move(b);
    }
    std::vector<const mining::ResponseSequence*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    auto loss = detail::split_contrastive(g, enc.encode_sequences(g, ptrs, drop), seq_idx.size(), cfg.negatives);
    l_seq = static_cast<double>(loss->value(0, 0));
    terms.push_back(loss);
    weights.push_back(static_cast<T>(cfg.loss_weights.seq));
  }
  if (!user_idx.empty()) {
    // each user is represented by a randomly placed window of their history
    auto window = [&](const std::string& uid) {
      const auto& h = d.train.users.at(uid);
      const std::size_t end = std::uniform_int_distribution<std::size_t>(1, h.size())(rng);
      return mining::make_sequence(h, end, cfg.miner.history_len, &d.vocab, false);
    };
    std::vector<mining::ResponseSequence> seqs(2 * user_idx.size());
    for (std::size_t i = 0; i < user_idx.size(); ++i) {
      const auto& p = pairs.user[user_idx[i]];
      seqs[i] = window(p.user_a);
      seqs[user_idx.size() + i] = window(p.user_b);
    }
    std::vector<const mining::ResponseSequence*> ptrs;
    for (const auto& s : seqs) ptrs.push_back(&s);
    auto loss = detail::split_contrastive(g, enc.encode_sequences(g, ptrs, drop), user_idx.size(), cfg.negatives);
    l_user = static_cast<double>(loss->value(0, 0));
    terms.push_back(loss);
    weights.push_back(static_cast<T>(cfg.loss_weights.user));
  }
  PretrainStep<T> out;
  out.report = pretraining_loss(l_utt, l_seq, l_user);
  out.report.n_utt = utt_idx.size();
  out.report.n_seq = seq_idx.size();
  out.report.n_user = user_idx.size();
  out.loss = g.weighted_sum(terms, weights);
  return out;
}

/// Contrastive pre-training of both encoders. Every step draws one batch per
/// enabled pair family and optimizes the sum of their losses. Writes
/// `loss_log.jsonl` and one checkpoint per epoch under `out_dir`.
template <typename T = float>
PretrainResult pretrain(const RunConfig& cfg, const Dataset& d, const mining::MinedPairs& pairs,
                        const std::filesystem::path& out_dir, Model<T>* model_out = nullptr) {
  if (!cfg.any_task_enabled()) throw UsageError("no enabled objectives");
  const std::size_t n_utt = cfg.disable_utt_task ? 0 : pairs.response.size();
  const std::size_t n_seq = cfg.disable_seq_task ? 0 : pairs.sequence.size();
  const std::size_t n_user = cfg.disable_user_task ? 0 : pairs.user.size();
  if (n_utt + n_seq + n_user == 0) throw DataError("no mined pairs for any enabled objective");
  if (!cfg.disable_utt_task && n_utt == 0) log_warn("no response pairs mined; utterance objective absent");
  if (!cfg.disable_seq_task && n_seq == 0) log_warn("no sequence pairs mined; sequence objective absent");
  if (!cfg.disable_user_task && n_user == 0) log_warn("no user pairs mined; user objective absent");

  Model<T> local(cfg, d.vocab.size(), false);
  Model<T>& model = model_out ? *model_out : local;
  nn::Adam<T> adam(cfg.pretrain_optimizer);
  std::mt19937_64 rng(cfg.seed ^ 0x70726574726169ULL);
  detail::BatchCycler utt(n_utt), seq(n_seq), user(n_user);

  const std::size_t largest = std::max({n_utt, n_seq, n_user});
  std::size_t steps_per_epoch = (largest + cfg.batch_size - 1) / cfg.batch_size;
  if (cfg.max_steps_per_epoch > 0) steps_per_epoch = std::min(steps_per_epoch, cfg.max_steps_per_epoch);

  std::filesystem::create_directories(out_dir);
  std::ofstream log_file(out_dir / "loss_log.jsonl");
  if (!log_file) throw DataError("cannot write " + (out_dir / "loss_log.jsonl").string());

  PretrainResult result;
  for (std::size_t epoch = 1; epoch <= cfg.pretrain_epochs; ++epoch) {
    double epoch_total = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      const auto ui = utt.next(cfg.batch_size, rng);
      const auto si = seq.next(cfg.batch_size, rng);
      const auto vi = user.next(cfg.batch_size, rng);
      nn::Graph<T> g;
      auto step = pretrain_step(g, model.encoder, cfg, d, pairs, ui, si, vi, rng);
      model.store.zero_grad();
      g.backward(step.loss);
      adam.step(model.store);
      nlohmann::json line = step.report;
      line["epoch"] = epoch;
      line["step"] = result.steps.size() + 1;
      log_file << line.dump() << '\n';
      epoch_total += step.report.l_total;
      result.steps.push_back(step.report);
    }
    result.epoch_mean_total.push_back(epoch_total / static_cast<double>(steps_per_epoch));
    log_info("pretrain epoch ", epoch, "/", cfg.pretrain_epochs, " mean l_total ", result.epoch_mean_total.back());
    result.checkpoint = out_dir / ("epoch_" + std::to_string(epoch));
    nn::save_checkpoint(model.store, result.checkpoint, nlohmann::json(cfg));
  }
  result.skipped_steps = adam.skipped_steps();
  if (result.skipped_steps > 0) log_warn(result.skipped_steps, " optimizer steps skipped on non-finite gradients");
  return result;
}

}  // namespace mcp::pipeline
