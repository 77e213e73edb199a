#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcp/numeric/parameters.hpp"

namespace mcp::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 0.0;  // global gradient-norm clip; 0 disables
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AdamConfig, learning_rate, beta1, beta2, epsilon, clip_norm)

/// Adam with bias-corrected first/second moments. A step whose gradients contain
/// any non-finite value is skipped entirely and counted.
template <typename T>
class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  /// Returns false when the step was skipped.
  bool step(ParameterStore<T>& store) {
    const auto& entries = store.entries();
    if (first_.size() != entries.size()) {
      first_.clear();
      second_.clear();
      for (const auto& [name, p] : entries) {
        first_.emplace_back(p->value.size(), 0.0);
        second_.emplace_back(p->value.size(), 0.0);
      }
    }
    double sq_norm = 0.0;
    for (const auto& [name, p] : entries) {
      if (!p->requires_grad) continue;
      for (T g : p->grad_buffer().data) {
        if (!std::isfinite(g)) {
          ++skipped_;
          return false;
        }
        sq_norm += static_cast<double>(g) * static_cast<double>(g);
      }
    }
    double clip = 1.0;
    if (cfg_.clip_norm > 0.0 && sq_norm > cfg_.clip_norm * cfg_.clip_norm) clip = cfg_.clip_norm / std::sqrt(sq_norm);
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    for (std::size_t i = 0; i < entries.size(); ++i) {
      const auto& p = entries[i].second;
      if (!p->requires_grad) continue;
      auto& m = first_[i];
      auto& v = second_[i];
      const auto& g = p->grad_buffer().data;
      for (std::size_t j = 0; j < g.size(); ++j) {
        const double gj = static_cast<double>(g[j]) * clip;
        m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
        v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
        const double update = cfg_.learning_rate * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.epsilon);
        p->value.data[j] = static_cast<T>(static_cast<double>(p->value.data[j]) - update);
      }
    }
    return true;
  }

  std::uint64_t steps() const { return steps_; }
  std::uint64_t skipped_steps() const { return skipped_; }

 private:
  AdamConfig cfg_;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
  std::uint64_t steps_ = 0;
  std::uint64_t skipped_ = 0;
};

}  // namespace mcp::nn
