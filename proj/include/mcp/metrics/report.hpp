#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <nlohmann/json.hpp>

#include "mcp/metrics/embedding.hpp"
#include "mcp/metrics/overlap.hpp"
#include "mcp/metrics/persona.hpp"

namespace mcp::metrics {

/// One evaluated response: generated tokens, gold tokens and the speaker's
/// historical responses.
struct MetricExample {
  Tokens candidate;
  Tokens reference;
  std::vector<Tokens> history;
};

struct MetricSettings {
  std::set<std::string> stopwords;
  const WordVectors* word_vectors = nullptr;  // embedding metrics are skipped when absent
  const IdfTable* idf = nullptr;
};

inline constexpr std::array<const char*, 8> kMetricNames{"bleu1",   "bleu2",   "rougeL",     "emb_avg",
                                                         "emb_ext", "emb_gre", "persona_f1", "persona_cover"};

struct MetricReport {
  // per-example values in kMetricNames order; nullopt for embedding metrics of
  // excluded examples
  std::array<std::vector<std::optional<double>>, 8> per_example;
  std::size_t num_examples = 0;
  std::size_t embedding_excluded = 0;

  std::optional<double> mean(std::size_t metric) const {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& v : per_example[metric])
      if (v) {
        total += *v;
        ++n;
      }
    if (n == 0) return std::nullopt;
    return total / static_cast<double>(n);
  }

  std::optional<double> mean(const std::string& name) const { return mean(index_of(name)); }

  static std::size_t index_of(const std::string& name) {
    for (std::size_t i = 0; i < kMetricNames.size(); ++i)
      if (name == kMetricNames[i]) return i;
    throw UsageError("unknown metric " + name);
  }
};

inline MetricReport evaluate_examples(const std::vector<MetricExample>& examples, const MetricSettings& settings) {
  if (!settings.idf) throw UsageError("evaluation needs an idf table");
  MetricReport r;
  r.num_examples = examples.size();
  for (const auto& ex : examples) {
    std::array<std::optional<double>, 8> v;
    v[0] = bleu_n(ex.candidate, ex.reference, 1);
    v[1] = bleu_n(ex.candidate, ex.reference, 2);
    v[2] = rouge_l(ex.candidate, ex.reference);
    std::optional<EmbeddingScores> emb;
    if (settings.word_vectors) emb = embedding_similarity(ex.candidate, ex.reference, *settings.word_vectors);
    if (emb) {
      v[3] = emb->average;
      v[4] = emb->extreme;
      v[5] = emb->greedy;
    } else {
      ++r.embedding_excluded;
    }
    v[6] = persona_f1(ex.candidate, ex.history, settings.stopwords);
    v[7] = persona_coverage(ex.candidate, ex.history, *settings.idf);
    for (std::size_t m = 0; m < v.size(); ++m) r.per_example[m].push_back(v[m]);
  }
  return r;
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  for (std::size_t m = 0; m < kMetricNames.size(); ++m) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& v : r.per_example[m]) per.push_back(v ? nlohmann::json(*v) : nlohmann::json(nullptr));
    const auto mean = r.mean(m);
    j[kMetricNames[m]] = {{"mean", mean ? nlohmann::json(*mean) : nlohmann::json(nullptr)}, {"per_example", per}};
  }
  j["counts"] = {{"examples", r.num_examples}, {"embedding_excluded", r.embedding_excluded}};
  return j;
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  for (std::size_t m = 0; m < kMetricNames.size(); ++m)
    for (const auto& v : j.at(kMetricNames[m]).at("per_example"))
      r.per_example[m].push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
  r.num_examples = j.at("counts").at("examples").get<std::size_t>();
  r.embedding_excluded = j.at("counts").at("embedding_excluded").get<std::size_t>();
  return r;
}

struct TTestResult {
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  double mean_difference = 0.0;
};

/// Two-sided paired t-test on per-example scores.
inline TTestResult paired_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DataError("paired t-test needs equally many scores on both sides");
  if (a.size() < 2) throw DataError("paired t-test needs at least two pairs");
  const auto n = static_cast<double>(a.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) mean += a[i] - b[i];
  mean /= n;
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i] - mean) * (a[i] - b[i] - mean);
  TTestResult r;
  r.dof = n - 1.0;
  r.mean_difference = mean;
  const double se = std::sqrt(ss / r.dof / n);
  if (se == 0.0) {
    r.t = mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p_value = mean == 0.0 ? 1.0 : 0.0;
    return r;
  }
  r.t = mean / se;
  boost::math::students_t dist(r.dof);
  r.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))), 0.0, 1.0);
  return r;
}

}  // namespace mcp::metrics
