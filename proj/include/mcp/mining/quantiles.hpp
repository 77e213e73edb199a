#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "mcp/common.hpp"
#include "mcp/corpus/types.hpp"
#include "mcp/mining/config.hpp"

namespace mcp::mining {

/// |t_{k+1} - t_k| over consecutive responses of every user, pooled.
inline std::vector<std::int64_t> consecutive_intervals(const corpus::Corpus& corpus) {
  std::vector<std::int64_t> pool;
  for (const auto& [id, h] : corpus.users)
    for (std::size_t k = 1; k < h.triples.size(); ++k)
      pool.push_back(std::llabs(h.triples[k].timestamp - h.triples[k - 1].timestamp));
  return pool;
}

/// Nearest-rank quantile: element ceil(q*m) (1-based, at least 1) of the sorted pool.
inline std::int64_t nearest_rank(std::vector<std::int64_t> pool, double q) {
  if (pool.empty()) throw DataError("corpus too small for threshold estimation");
  const std::size_t m = pool.size();
  auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(m) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, m);
  std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(rank - 1), pool.end());
  return pool[rank - 1];
}

inline std::vector<std::int64_t> compute_interval_quantiles(const corpus::Corpus& corpus,
                                                            const std::vector<double>& quantiles) {
  const auto pool = consecutive_intervals(corpus);
  if (pool.empty()) throw DataError("corpus too small for threshold estimation");
  std::vector<std::int64_t> out;
  for (double q : quantiles) out.push_back(nearest_rank(pool, q));
  return out;
}

/// Fills any unset time threshold from the configured interval quantiles.
inline MinerConfig resolve_thresholds(MinerConfig cfg, const corpus::Corpus& corpus) {
  if (!cfg.thresholds_resolved()) {
    const auto q = compute_interval_quantiles(corpus, {cfg.t_tilde_quantile, cfg.t_hat_quantile});
    if (cfg.t_tilde < 0) cfg.t_tilde = q[0];
    if (cfg.t_hat < 0) cfg.t_hat = q[1];
  }
  cfg.validate();
  return cfg;
}

}  // namespace mcp::mining
