#pragma once
// Independent reference implementations used only by the tests. They favour
// directness over speed: O(n^2) enumeration, sort-and-index, exhaustive search.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "mcp/corpus/types.hpp"
#include "mcp/numeric/parameters.hpp"

namespace oracle {

// (user, i, j) for every i < j with the same addressee and |t_i - t_j| <= t_tilde.
inline std::vector<std::tuple<std::string, std::size_t, std::size_t>> response_pairs(const mcp::corpus::Corpus& c,
                                                                                       std::int64_t t_tilde) {
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> out;
  for (const auto& [id, h] : c.users)
    for (std::size_t i = 0; i < h.size(); ++i)
      for (std::size_t j = i + 1; j < h.size(); ++j) {
        const auto& a = h.triples[i];
        const auto& b = h.triples[j];
        if (a.addressee_id == b.addressee_id && std::llabs(a.timestamp - b.timestamp) <= t_tilde)
          out.emplace_back(id, i, j);
      }
  return out;
}

// (a, b, shared) for every user pair a < b whose addressee sets share >= s_hat members.
inline std::vector<std::tuple<std::string, std::string, std::size_t>> user_pairs(const mcp::corpus::Corpus& c,
                                                                                   std::size_t s_hat) {
  std::vector<std::pair<std::string, std::set<std::string>>> sets;
  for (const auto& [id, h] : c.users) {
    std::set<std::string> s;
    for (const auto& t : h.triples) s.insert(t.addressee_id);
    sets.emplace_back(id, s);
  }
  std::vector<std::tuple<std::string, std::string, std::size_t>> out;
  for (std::size_t a = 0; a < sets.size(); ++a)
    for (std::size_t b = a + 1; b < sets.size(); ++b) {
      std::size_t shared = 0;
      for (const auto& x : sets[a].second) shared += sets[b].second.count(x);
      if (shared >= s_hat) out.emplace_back(sets[a].first, sets[b].first, shared);
    }
  return out;
}

// Smallest 1-based rank k with k / m >= q, i.e. ceil(q m), by direct search on
// exact rationals q = num / den.
inline std::int64_t quantile(std::vector<std::int64_t> pool, std::int64_t num, std::int64_t den) {
  std::sort(pool.begin(), pool.end());
  const auto m = static_cast<std::int64_t>(pool.size());
  std::int64_t k = 1;
  while (k < m && k * den < num * m) ++k;
  return pool[static_cast<std::size_t>(k - 1)];
}

// Relative error between analytic and central-difference gradients at
// `probes` random coordinates drawn across all trainable parameters.
struct GradCheck {
  double max_rel_error = 0.0;
  std::size_t probes = 0;
};

inline double rel_error(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-7) return std::abs(analytic - numeric);
  return std::abs(analytic - numeric) / scale;
}

inline GradCheck check_gradients(mcp::nn::ParameterStore<double>& store,
                                 const std::function<double(bool backward)>& loss, std::size_t probes,
                                 std::uint64_t seed, double h = 1e-3) {
  store.zero_grad();
  loss(true);
  std::vector<std::pair<mcp::nn::Var<double>, std::size_t>> coords;
  for (const auto& [name, p] : store.entries())
    if (p->requires_grad)
      for (std::size_t i = 0; i < p->value.size(); ++i) coords.emplace_back(p, i);
  std::mt19937_64 rng(seed);
  GradCheck r;
  for (std::size_t k = 0; k < probes && !coords.empty(); ++k) {
    auto [p, i] = coords[std::uniform_int_distribution<std::size_t>(0, coords.size() - 1)(rng)];
    const double analytic = p->grad_buffer().data[i];
    const double saved = p->value.data[i];
    p->value.data[i] = saved + h;
    const double up = loss(false);
    p->value.data[i] = saved - h;
    const double down = loss(false);
    p->value.data[i] = saved;
    r.max_rel_error = std::max(r.max_rel_error, rel_error(analytic, (up - down) / (2 * h)));
    ++r.probes;
  }
  return r;
}

// Exhaustive search over all token sequences of length <= max_len: the best
// EOS-terminated sequence, else the best sequence of length max_len. Ties:
// higher score, then shorter, then lexicographically smaller.
struct Scored {
  std::vector<int> tokens;
  double log_prob;
};

inline bool better(const Scored& a, const Scored& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  if (a.tokens.size() != b.tokens.size()) return a.tokens.size() < b.tokens.size();
  return a.tokens < b.tokens;
}

using StepTable = std::function<std::vector<double>(const std::vector<int>&)>;  // prefix (without BOS) -> probs

inline Scored exhaustive(const StepTable& probs, int eos, std::size_t max_len) {
  std::vector<Scored> finished, unfinished;
  std::function<void(std::vector<int>&, double)> rec = [&](std::vector<int>& prefix, double lp) {
    if (prefix.size() == max_len) {
      unfinished.push_back({prefix, lp});
      return;
    }
    const auto p = probs(prefix);
    for (int v = 0; v < static_cast<int>(p.size()); ++v) {
      if (p[static_cast<std::size_t>(v)] <= 0.0) continue;
      prefix.push_back(v);
      const double next = lp + std::log(p[static_cast<std::size_t>(v)]);
      if (v == eos) finished.push_back({prefix, next});
      else rec(prefix, next);
      prefix.pop_back();
    }
  };
  std::vector<int> start;
  rec(start, 0.0);
  const auto& pool = finished.empty() ? unfinished : finished;
  return *std::min_element(pool.begin(), pool.end(), better);
}

// Argmax decoding (lowest id on ties) until EOS or max_len tokens.
inline Scored greedy(const StepTable& probs, int eos, std::size_t max_len) {
  Scored s{{}, 0.0};
  while (s.tokens.size() < max_len) {
    const auto p = probs(s.tokens);
    const auto best = static_cast<int>(std::max_element(p.begin(), p.end()) - p.begin());
    s.tokens.push_back(best);
    s.log_prob += std::log(p[static_cast<std::size_t>(best)]);
    if (best == eos) break;
  }
  return s;
}

// ---- metrics, written from the definitions with plain loops ----

using Words = std::vector<std::string>;

inline double bleu(const Words& c, const Words& r, int n) {
  if (c.empty()) return 0.0;
  double log_sum = 0.0;
  for (int k = 1; k <= n; ++k) {
    std::vector<Words> cg, rg;
    for (std::size_t i = 0; i + static_cast<std::size_t>(k) <= c.size(); ++i)
      cg.emplace_back(c.begin() + static_cast<long>(i), c.begin() + static_cast<long>(i) + k);
    for (std::size_t i = 0; i + static_cast<std::size_t>(k) <= r.size(); ++i)
      rg.emplace_back(r.begin() + static_cast<long>(i), r.begin() + static_cast<long>(i) + k);
    // clipped matches: greedily consume reference occurrences
    std::vector<bool> used(rg.size(), false);
    std::size_t matched = 0;
    for (const auto& g : cg)
      for (std::size_t j = 0; j < rg.size(); ++j)
        if (!used[j] && rg[j] == g) {
          used[j] = true;
          ++matched;
          break;
        }
    double p;
    if (matched > 0) p = static_cast<double>(matched) / static_cast<double>(cg.size());
    else if (k >= 2) p = 1.0 / (static_cast<double>(cg.size()) + 1.0);
    else return 0.0;
    log_sum += std::log(p);
  }
  const double bp = c.size() >= r.size() ? 1.0 : std::exp(1.0 - static_cast<double>(r.size()) / static_cast<double>(c.size()));
  return bp * std::exp(log_sum / n);
}

// LCS by memoized recursion.
inline std::size_t lcs(const Words& a, const Words& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> f = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size() || j == b.size()) return 0;
    auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t v = a[i] == b[j] ? 1 + f(i + 1, j + 1) : std::max(f(i + 1, j), f(i, j + 1));
    memo[key] = v;
    return v;
  };
  return f(0, 0);
}

inline double rouge_l(const Words& c, const Words& r) {
  const double l = static_cast<double>(lcs(c, r));
  if (c.empty() || l == 0) return 0.0;
  const double p = l / static_cast<double>(c.size()), rc = l / static_cast<double>(r.size());
  return 2 * p * rc / (p + rc);
}

inline double persona_f1(const Words& c, const std::vector<Words>& hist, const std::set<std::string>& stop) {
  std::set<std::string> cs, hs;
  for (const auto& w : c)
    if (!stop.count(w)) cs.insert(w);
  for (const auto& h : hist)
    for (const auto& w : h)
      if (!stop.count(w)) hs.insert(w);
  std::vector<std::string> common;
  std::set_intersection(cs.begin(), cs.end(), hs.begin(), hs.end(), std::back_inserter(common));
  if (common.empty()) return 0.0;
  const double p = static_cast<double>(common.size()) / static_cast<double>(cs.size());
  const double r = static_cast<double>(common.size()) / static_cast<double>(hs.size());
  return 2 * p * r / (p + r);
}

inline double idf(const std::vector<Words>& docs, const std::string& w) {
  double df = 0;
  for (const auto& d : docs)
    if (std::find(d.begin(), d.end(), w) != d.end()) df += 1;
  return std::log((1.0 + static_cast<double>(docs.size())) / (1.0 + df)) + 1.0;
}

inline double persona_coverage(const Words& c, const std::vector<Words>& hist, const std::vector<Words>& docs) {
  std::set<std::string> cs(c.begin(), c.end());
  if (cs.empty()) return 0.0;
  double denom = 0;
  for (const auto& w : cs) denom += idf(docs, w);
  double best = 0;
  for (const auto& h : hist) {
    double num = 0;
    for (const auto& w : cs)
      if (std::find(h.begin(), h.end(), w) != h.end()) num += idf(docs, w);
    best = std::max(best, num / denom);
  }
  return best;
}

using Vec = std::vector<double>;

inline double cos(const Vec& a, const Vec& b) {
  double d = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    d += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  return (na == 0 || nb == 0) ? 0.0 : d / std::sqrt(na) / std::sqrt(nb);
}

struct Emb {
  double avg, ext, gre;
};

// `vecs` holds only in-vocabulary words' vectors for each side (non-empty).
inline Emb embedding(const std::vector<Vec>& c, const std::vector<Vec>& r) {
  const std::size_t d = c[0].size();
  auto mean = [&](const std::vector<Vec>& vs) {
    Vec m(d, 0);
    for (const auto& v : vs)
      for (std::size_t i = 0; i < d; ++i) m[i] += v[i] / static_cast<double>(vs.size());
    return m;
  };
  auto extreme = [&](const std::vector<Vec>& vs) {
    Vec e(d, 0);
    for (std::size_t i = 0; i < d; ++i) {
      double mx = -1e300, mn = 1e300;
      for (const auto& v : vs) {
        mx = std::max(mx, v[i]);
        mn = std::min(mn, v[i]);
      }
      e[i] = std::abs(mn) > std::abs(mx) ? mn : mx;
    }
    return e;
  };
  auto greedy_dir = [&](const std::vector<Vec>& a, const std::vector<Vec>& b) {
    double s = 0;
    for (const auto& u : a) {
      double best = -2;
      for (const auto& v : b) best = std::max(best, cos(u, v));
      s += best;
    }
    return s / static_cast<double>(a.size());
  };
  return {cos(mean(c), mean(r)), cos(extreme(c), extreme(r)), (greedy_dir(c, r) + greedy_dir(r, c)) / 2};
}

}  // namespace oracle
