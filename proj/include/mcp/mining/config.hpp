#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "mcp/common.hpp"

namespace mcp::mining {

struct MinerConfig {
  std::int64_t t_tilde = -1;  // response-pair time threshold (s); negative = estimate from quantile
  std::int64_t t_hat = -1;    // short-interval threshold (s); negative = estimate from quantile
  double t_tilde_quantile = 0.25;
  double t_hat_quantile = 0.05;
  std::size_t s_hat = 1;       // minimum shared interlocutors for a user pair
  double k_percent = 30.0;     // random-mask percentage
  std::size_t history_len = 20;
  std::size_t num_swaps = 0;   // 0 = max(1, floor(n / 10))
  std::size_t max_user_pairs_per_epoch = 10000;
  std::size_t views_per_user = 8;  // augmented sequence pairs written per user by mine-pairs

  bool thresholds_resolved() const { return t_tilde >= 0 && t_hat >= 0; }

  void validate() const {
    if (thresholds_resolved() && t_tilde < t_hat) throw UsageError("miner: t_tilde must be >= t_hat");
    if (s_hat < 1) throw UsageError("miner: s_hat must be >= 1");
    if (!(k_percent > 0.0 && k_percent < 100.0)) throw UsageError("miner: k_percent must lie in (0, 100)");
    if (history_len < 1) throw UsageError("miner: history_len must be >= 1");
    for (double q : {t_tilde_quantile, t_hat_quantile})
      if (q < 0.0 || q > 1.0) throw UsageError("miner: quantiles must lie in [0, 1]");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MinerConfig, t_tilde, t_hat, t_tilde_quantile, t_hat_quantile, s_hat,
                                                k_percent, history_len, num_swaps, max_user_pairs_per_epoch,
                                                views_per_user)

}  // namespace mcp::mining
