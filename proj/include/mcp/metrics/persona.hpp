#pragma once

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mcp/metrics/overlap.hpp"

namespace mcp::metrics {

/// Inverse document frequency over responses: ln((1 + D) / (1 + df)) + 1.
/// Unseen words get df = 0.
class IdfTable {
 public:
  IdfTable() = default;

  static IdfTable build(const std::vector<Tokens>& documents) {
    IdfTable t;
    t.num_documents_ = documents.size();
    for (const auto& doc : documents)
      for (const auto& w : std::set<std::string>(doc.begin(), doc.end())) ++t.df_[w];
    return t;
  }

  /// Pins a word's idf, overriding the document count.
  void set_idf(const std::string& word, double value) { fixed_[word] = value; }

  double idf(const std::string& word) const {
    if (auto f = fixed_.find(word); f != fixed_.end()) return f->second;
    auto it = df_.find(word);
    const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
    return std::log((1.0 + static_cast<double>(num_documents_)) / (1.0 + df)) + 1.0;
  }

  std::size_t num_documents() const { return num_documents_; }
  const std::map<std::string, std::size_t>& document_frequencies() const { return df_; }

 private:
  std::size_t num_documents_ = 0;
  std::map<std::string, std::size_t> df_;
  std::map<std::string, double> fixed_;
};

/// Small English stopword list; evaluation configs may replace it.
inline const std::vector<std::string>& default_stopwords() {
  static const std::vector<std::string> words{"a",  "an", "the", "and", "or", "but", "is",  "are", "was", "to",
                                              "of", "in", "on",  "at",  "it", "that", "this", "with", "for", "be"};
  return words;
}

inline std::set<std::string> distinct_without(const Tokens& toks, const std::set<std::string>& stopwords) {
  std::set<std::string> out;
  for (const auto& t : toks)
    if (!stopwords.count(t)) out.insert(t);
  return out;
}

/// Unigram F1 between the candidate's distinct words and the pooled distinct
/// words of the history, stopwords removed.
inline double persona_f1(const Tokens& candidate, const std::vector<Tokens>& history,
                         const std::set<std::string>& stopwords = {}) {
  if (history.empty()) throw DataError("persona_f1 needs a non-empty history");
  const auto cand = distinct_without(candidate, stopwords);
  std::set<std::string> hist;
  for (const auto& h : history) hist.merge(distinct_without(h, stopwords));
  if (cand.empty() || hist.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& w : cand) common += hist.count(w);
  if (common == 0) return 0.0;
  const double p = static_cast<double>(common) / static_cast<double>(cand.size());
  const double r = static_cast<double>(common) / static_cast<double>(hist.size());
  return 2.0 * p * r / (p + r);
}

/// Max over history responses of the idf mass of shared distinct words over
/// the idf mass of the candidate's distinct words.
inline double persona_coverage(const Tokens& candidate, const std::vector<Tokens>& history, const IdfTable& idf) {
  if (history.empty()) throw DataError("persona_coverage needs a non-empty history");
  const std::set<std::string> cand(candidate.begin(), candidate.end());
  if (cand.empty()) return 0.0;
  double denom = 0.0;
  for (const auto& w : cand) denom += idf.idf(w);
  double best = 0.0;
  for (const auto& h : history) {
    const std::set<std::string> words(h.begin(), h.end());
    double num = 0.0;
    for (const auto& w : cand)
      if (words.count(w)) num += idf.idf(w);
    best = std::max(best, num / denom);
  }
  return best;
}

}  // namespace mcp::metrics
