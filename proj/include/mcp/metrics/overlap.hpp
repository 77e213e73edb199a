#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "mcp/common.hpp"

namespace mcp::metrics {

using Tokens = std::vector<std::string>;

namespace detail {

inline std::map<Tokens, std::size_t> ngram_counts(const Tokens& toks, std::size_t n) {
  std::map<Tokens, std::size_t> counts;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) ++counts[Tokens(toks.begin() + i, toks.begin() + i + n)];
  return counts;
}

inline void require_reference(const Tokens& reference) {
  if (reference.empty()) throw DataError("metric reference is empty");
}

}  // namespace detail

/// Clipped n-gram precision: matched count and candidate n-gram total.
struct NgramPrecision {
  std::size_t matched = 0;
  std::size_t total = 0;
};

inline NgramPrecision modified_precision(const Tokens& candidate, const Tokens& reference, std::size_t n) {
  NgramPrecision p;
  const auto ref = detail::ngram_counts(reference, n);
  for (const auto& [gram, count] : detail::ngram_counts(candidate, n)) {
    p.total += count;
    auto it = ref.find(gram);
    if (it != ref.end()) p.matched += std::min(count, it->second);
  }
  return p;
}

/// Sentence BLEU-n: brevity penalty times the geometric mean of the clipped
/// 1..n-gram precisions. A zero-match precision for orders >= 2 is add-one
/// smoothed to 1 / (total + 1).
inline double bleu_n(const Tokens& candidate, const Tokens& reference, std::size_t n) {
  detail::require_reference(reference);
  if (n < 1) throw UsageError("bleu order must be >= 1");
  if (candidate.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const auto p = modified_precision(candidate, reference, k);
    double prec;
    if (p.matched > 0) {
      prec = static_cast<double>(p.matched) / static_cast<double>(p.total);
    } else if (k >= 2) {
      prec = 1.0 / static_cast<double>(p.total + 1);
    } else {
      return 0.0;
    }
    log_sum += std::log(prec);
  }
  const double ratio = static_cast<double>(reference.size()) / static_cast<double>(candidate.size());
  const double bp = std::exp(std::min(0.0, 1.0 - ratio));
  return bp * std::exp(log_sum / static_cast<double>(n));
}

inline std::size_t lcs_length(const Tokens& a, const Tokens& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// LCS F1.
inline double rouge_l(const Tokens& candidate, const Tokens& reference) {
  detail::require_reference(reference);
  if (candidate.empty()) return 0.0;
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  if (lcs == 0.0) return 0.0;
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return 2.0 * p * r / (p + r);
}

}  // namespace mcp::metrics
