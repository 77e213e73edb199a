#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcp/common.hpp"

namespace mcp {

struct GenerationConfig {
  std::size_t beam_width = 12;
  std::size_t max_decode_len = 20;
  double length_alpha = 0.0;  // score = sum log p / |y|^alpha when > 0

  void validate() const {
    if (beam_width < 1) throw UsageError("beam_width must be >= 1");
    if (max_decode_len < 1) throw UsageError("max_decode_len must be >= 1");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenerationConfig, beam_width, max_decode_len, length_alpha)

struct Hypothesis {
  std::vector<int> tokens;  // generated tokens, without BOS, including EOS when finished
  double log_prob = 0.0;
  double score = 0.0;
  bool finished = false;
};

/// Next-token log-probabilities for each prefix (prefixes start with BOS).
using StepFunction = std::function<std::vector<std::vector<double>>(const std::vector<std::vector<int>>&)>;

namespace detail {

inline double length_normalized(double log_prob, std::size_t len, double alpha) {
  return alpha > 0.0 ? log_prob / std::pow(static_cast<double>(len), alpha) : log_prob;
}

/// Higher score first; ties prefer earlier EOS, then lexicographically smaller ids.
inline bool better(const Hypothesis& a, const Hypothesis& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

}  // namespace detail

/// Beam search maximizing summed log-probability. Each step keeps the
/// `beam_width` best extensions of all live hypotheses; extensions ending in
/// EOS retire to the finished pool. Returns the best finished hypothesis, or
/// the best unfinished one when nothing finished within max_decode_len.
inline Hypothesis beam_search(const StepFunction& step, int bos, int eos, const GenerationConfig& cfg) {
  cfg.validate();
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;
  for (std::size_t t = 0; t < cfg.max_decode_len && !live.empty(); ++t) {
    std::vector<std::vector<int>> prefixes;
    for (const auto& h : live) {
      std::vector<int> p{bos};
      p.insert(p.end(), h.tokens.begin(), h.tokens.end());
      prefixes.push_back(std::move(p));
    }
    const auto log_probs = step(prefixes);
    if (log_probs.size() != live.size()) throw NumericError("beam step returned wrong number of distributions");
    std::vector<Hypothesis> candidates;
    for (std::size_t b = 0; b < live.size(); ++b)
      for (std::size_t tok = 0; tok < log_probs[b].size(); ++tok) {
        const double lp = log_probs[b][tok];
        if (!std::isfinite(lp)) continue;
        Hypothesis c;
        c.tokens = live[b].tokens;
        c.tokens.push_back(static_cast<int>(tok));
        c.log_prob = live[b].log_prob + lp;
        c.finished = static_cast<int>(tok) == eos;
        c.score = detail::length_normalized(c.log_prob, c.tokens.size(), cfg.length_alpha);
        candidates.push_back(std::move(c));
      }
    const std::size_t keep = std::min(cfg.beam_width, candidates.size());
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      detail::better);
    live.clear();
    for (std::size_t i = 0; i < keep; ++i) (candidates[i].finished ? finished : live).push_back(std::move(candidates[i]));
    if (cfg.length_alpha <= 0.0 && !finished.empty() && !live.empty()) {
      // scores only decrease as hypotheses grow, so no live beam can overtake this
      const auto best_done = *std::min_element(finished.begin(), finished.end(), detail::better);
      const auto best_live = *std::min_element(live.begin(), live.end(), detail::better);
      if (best_done.score >= best_live.score) live.clear();
    }
  }
  const auto& pool = finished.empty() ? live : finished;
  if (pool.empty()) return Hypothesis{};
  return *std::min_element(pool.begin(), pool.end(), detail::better);
}

}  // namespace mcp
