#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mcp/common.hpp"
#include "mcp/metrics/overlap.hpp"

namespace mcp::metrics {

/// Word-vector table. Text format: `token v1 ... vd` per line.
class WordVectors {
 public:
  WordVectors() = default;
  explicit WordVectors(std::size_t dim) : dim_(dim) {}

  static WordVectors load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open word vectors " + path.string());
    WordVectors wv;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::istringstream is(line);
      std::string word;
      if (!(is >> word)) continue;
      std::vector<double> v;
      double x;
      while (is >> x) v.push_back(x);
      if (v.empty()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": word without a vector");
      if (wv.dim_ == 0) wv.dim_ = v.size();
      if (v.size() != wv.dim_)
        throw DataError(path.string() + ":" + std::to_string(lineno) + ": expected " + std::to_string(wv.dim_) +
                        " components, got " + std::to_string(v.size()));
      wv.table_[word] = std::move(v);
    }
    if (wv.table_.empty()) throw DataError("no word vectors in " + path.string());
    return wv;
  }

  void add(const std::string& word, std::vector<double> v) {
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_) throw DataError("word vector for '" + word + "' has the wrong dimension");
    table_[word] = std::move(v);
  }

  const std::vector<double>* find(const std::string& word) const {
    auto it = table_.find(word);
    return it == table_.end() ? nullptr : &it->second;
  }

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  bool empty() const { return table_.empty(); }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

struct EmbeddingScores {
  double average = 0.0;
  double extreme = 0.0;
  double greedy = 0.0;
};

namespace detail {

inline double cosine(const std::vector<double>& u, const std::vector<double>& v) {
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(nu * nv), -1.0, 1.0);
}

inline std::vector<const std::vector<double>*> lookup(const Tokens& toks, const WordVectors& wv) {
  std::vector<const std::vector<double>*> out;
  for (const auto& t : toks)
    if (const auto* v = wv.find(t)) out.push_back(v);
  return out;
}

inline std::vector<double> mean_vector(const std::vector<const std::vector<double>*>& vs, std::size_t dim) {
  std::vector<double> m(dim, 0.0);
  for (const auto* v : vs)
    for (std::size_t i = 0; i < dim; ++i) m[i] += (*v)[i];
  for (double& x : m) x /= static_cast<double>(vs.size());
  return m;
}

// per dimension, the component with the largest magnitude (first one on ties)
inline std::vector<double> extreme_vector(const std::vector<const std::vector<double>*>& vs, std::size_t dim) {
  std::vector<double> e(dim, 0.0);
  for (std::size_t i = 0; i < dim; ++i)
    for (const auto* v : vs)
      if (std::abs((*v)[i]) > std::abs(e[i])) e[i] = (*v)[i];
  return e;
}

inline double greedy_direction(const std::vector<const std::vector<double>*>& from,
                               const std::vector<const std::vector<double>*>& to) {
  double total = 0.0;
  for (const auto* u : from) {
    double best = -1.0;
    for (const auto* v : to) best = std::max(best, cosine(*u, *v));
    total += best;
  }
  return total / static_cast<double>(from.size());
}

}  // namespace detail

/// Average, Extreme and Greedy embedding similarity. OOV words are skipped;
/// nullopt when either side has no in-vocabulary word.
inline std::optional<EmbeddingScores> embedding_similarity(const Tokens& candidate, const Tokens& reference,
                                                           const WordVectors& wv) {
  const auto c = detail::lookup(candidate, wv);
  const auto r = detail::lookup(reference, wv);
  if (c.empty() || r.empty()) return std::nullopt;
  EmbeddingScores s;
  s.average = detail::cosine(detail::mean_vector(c, wv.dim()), detail::mean_vector(r, wv.dim()));
  s.extreme = detail::cosine(detail::extreme_vector(c, wv.dim()), detail::extreme_vector(r, wv.dim()));
  s.greedy = 0.5 * (detail::greedy_direction(c, r) + detail::greedy_direction(r, c));
  return s;
}

}  // namespace mcp::metrics
