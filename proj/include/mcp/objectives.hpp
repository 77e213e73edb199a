#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcp/numeric/autograd.hpp"

namespace mcp {

/// u.v / (|u||v|); a zero-norm input yields 0 and a warning.
inline double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw NumericError("cosine_similarity: length mismatch");
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) {
    log_warn("cosine similarity of a zero vector defined as 0");
    return 0.0;
  }
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

/// -log[ phi(a,p) / (phi(a,p) + sum_n phi(a,n)) ] with phi = exp(cos), no temperature.
inline double info_nce(std::span<const double> anchor, std::span<const double> positive,
                       const std::vector<std::vector<double>>& negatives) {
  const double pos = cosine_similarity(anchor, positive);
  std::vector<double> sims{pos};
  for (const auto& n : negatives) sims.push_back(cosine_similarity(anchor, n));
  const double mx = *std::max_element(sims.begin(), sims.end());
  double total = 0.0;
  for (double s : sims) total += std::exp(s - mx);
  return -(pos - mx) + std::log(total);
}

enum class NegativeMode { kPositives, kBothSides };

NLOHMANN_JSON_SERIALIZE_ENUM(NegativeMode, {{NegativeMode::kPositives, "positives"},
                                            {NegativeMode::kBothSides, "both_sides"}})

/// Aligned anchor/positive vectors of one mini-batch.
struct ContrastiveBatch {
  std::vector<std::vector<double>> anchors;
  std::vector<std::vector<double>> positives;
};

/// Mean over pairs of info_nce(anchor_i, positive_i, negatives_i). Negatives are
/// the positives of the other N-1 pairs, plus their anchors in both-sides mode.
inline double batch_contrastive_loss(const ContrastiveBatch& batch, NegativeMode mode = NegativeMode::kPositives) {
  const std::size_t n = batch.anchors.size();
  if (n == 0 || batch.positives.size() != n) throw NumericError("contrastive batch needs N >= 1 aligned pairs");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<double>> negatives;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      negatives.push_back(batch.positives[j]);
      if (mode == NegativeMode::kBothSides) negatives.push_back(batch.anchors[j]);
    }
    total += info_nce(batch.anchors[i], batch.positives[i], negatives);
  }
  return total / static_cast<double>(n);
}

/// Utterance-, sequence- and user-level losses share one form; the aliases
/// name the anchor/positive roles.
inline double batch_utterance_loss(const ContrastiveBatch& b, NegativeMode m = NegativeMode::kPositives) {
  return batch_contrastive_loss(b, m);
}
inline double batch_sequence_loss(const ContrastiveBatch& originals_vs_augmented,
                                  NegativeMode m = NegativeMode::kPositives) {
  return batch_contrastive_loss(originals_vs_augmented, m);
}
inline double batch_user_loss(const ContrastiveBatch& profiles_vs_similar, NegativeMode m = NegativeMode::kPositives) {
  return batch_contrastive_loss(profiles_vs_similar, m);
}

/// Differentiable batch InfoNCE over rows of `anchors` and `positives` (N x d).
template <typename T>
nn::Var<T> contrastive_loss(nn::Graph<T>& g, const nn::Var<T>& anchors, const nn::Var<T>& positives,
                            NegativeMode mode = NegativeMode::kPositives) {
  const std::size_t n = anchors->value.rows;
  if (n == 0 || positives->value.rows != n) throw NumericError("contrastive_loss: batch shapes differ");
  auto a = g.l2_normalize_rows(anchors);
  auto p = g.l2_normalize_rows(positives);
  std::vector<long> targets(n);
  for (std::size_t i = 0; i < n; ++i) targets[i] = static_cast<long>(i);
  if (mode == NegativeMode::kPositives) return g.cross_entropy(g.matmul_nt(a, p), targets);
  // logits row i: [cos(a_i, p_j)]_j then [cos(a_i, a_j)]_j, with the self term a_i.a_i excluded
  auto ap = g.matmul_nt(a, p);
  auto aa = g.matmul_nt(a, a);
  const std::size_t cols = 2 * n;
  nn::Matrix<T> place_left(n, cols), place_right(n, cols);
  std::vector<std::uint8_t> excluded(n * cols, 0);
  for (std::size_t i = 0; i < n; ++i) {
    place_left(i, i) = T(1);
    place_right(i, n + i) = T(1);
    excluded[i * cols + n + i] = 1;
  }
  auto joined = g.add(g.matmul(ap, g.constant(place_left)), g.matmul(aa, g.constant(place_right)));
  return g.cross_entropy(joined, targets, excluded);
}

/// Mean over non-pad steps of -log p(target); rows of `distributions` are
/// per-step probabilities over the vocabulary.
template <typename T>
double generation_loss(const nn::Matrix<T>& distributions, const std::vector<long>& targets,
                       const std::vector<std::uint8_t>& is_pad) {
  if (targets.size() != distributions.rows || is_pad.size() != targets.size())
    throw NumericError("generation_loss: steps do not line up");
  double total = 0.0;
  std::size_t counted = 0;
  for (std::size_t s = 0; s < targets.size(); ++s) {
    if (is_pad[s]) continue;
    if (targets[s] < 0 || static_cast<std::size_t>(targets[s]) >= distributions.cols)
      throw NumericError("generation_loss: target id " + std::to_string(targets[s]) + " outside vocabulary of size " +
                         std::to_string(distributions.cols));
    total -= std::log(static_cast<double>(distributions(s, static_cast<std::size_t>(targets[s]))));
    ++counted;
  }
  return counted == 0 ? 0.0 : total / static_cast<double>(counted);
}

/// Per-step pre-training losses. Absent terms contribute zero and are flagged.
struct LossReport {
  double l_utt = 0.0;
  double l_seq = 0.0;
  double l_user = 0.0;
  double l_total = 0.0;
  std::size_t n_utt = 0;
  std::size_t n_seq = 0;
  std::size_t n_user = 0;
  bool utt_absent = true;
  bool seq_absent = true;
  bool user_absent = true;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LossReport, l_utt, l_seq, l_user, l_total, n_utt, n_seq, n_user,
                                                utt_absent, seq_absent, user_absent)

/// Unweighted sum of the present terms; fills l_total and the absence flags.
inline LossReport pretraining_loss(std::optional<double> utt, std::optional<double> seq, std::optional<double> user) {
  LossReport r;
  r.utt_absent = !utt.has_value();
  r.seq_absent = !seq.has_value();
  r.user_absent = !user.has_value();
  r.l_utt = utt.value_or(0.0);
  r.l_seq = seq.value_or(0.0);
  r.l_user = user.value_or(0.0);
  r.l_total = r.l_utt + r.l_seq + r.l_user;
  return r;
}

}  // namespace mcp
