#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcp/numeric/parameters.hpp"

namespace mcp::nn {

struct TransformerConfig {
  std::size_t num_layers = 2;
  std::size_t hidden_size = 64;
  std::size_t num_heads = 4;
  std::size_t ff_multiplier = 4;
  std::size_t max_positions = 64;
  double dropout = 0.0;

  void validate() const {
    if (num_layers < 1) throw UsageError("transformer needs at least one layer");
    if (num_heads < 1 || hidden_size % num_heads != 0)
      throw UsageError("hidden_size " + std::to_string(hidden_size) + " not divisible by num_heads " +
                       std::to_string(num_heads));
    if (max_positions < 1 || ff_multiplier < 1) throw UsageError("invalid transformer sizes");
    if (dropout < 0.0 || dropout >= 1.0) throw UsageError("dropout must lie in [0, 1)");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TransformerConfig, num_layers, hidden_size, num_heads, ff_multiplier,
                                                max_positions, dropout)

/// Rows of several sequences stacked into one matrix. `valid` flags real rows;
/// invalid rows (padding) are never attended to and never pooled.
struct PackedLayout {
  std::vector<Segment> segments;
  std::vector<std::uint8_t> valid;

  std::size_t rows() const {
    return segments.empty() ? 0 : segments.back().offset + segments.back().length;
  }

  /// Appends a segment of `length` rows, all valid.
  void push(std::size_t length) { push(std::vector<std::uint8_t>(length, 1)); }

  void push(const std::vector<std::uint8_t>& row_valid) {
    segments.push_back({rows(), row_valid.size()});
    valid.insert(valid.end(), row_valid.begin(), row_valid.end());
  }
};

/// Position encodings laid out to match a packed layout (position restarts at
/// zero in every segment).
template <typename T>
Matrix<T> packed_positions(const PackedLayout& layout, std::size_t dim, std::size_t max_positions) {
  std::size_t longest = 0;
  for (const auto& s : layout.segments) longest = std::max(longest, s.length);
  if (longest > max_positions)
    throw NumericError("sequence length " + std::to_string(longest) + " exceeds max positions " +
                       std::to_string(max_positions));
  const Matrix<T> table = sinusoidal_positions<T>(std::max<std::size_t>(longest, 1), dim);
  Matrix<T> out(layout.rows(), dim);
  for (const auto& s : layout.segments)
    for (std::size_t i = 0; i < s.length; ++i)
      std::copy_n(table.data.begin() + i * dim, dim, out.data.begin() + (s.offset + i) * dim);
  return out;
}

/// Pre-LN transformer stack. In decoder mode each layer adds causal
/// self-attention and cross-attention over an encoder memory.
template <typename T>
class TransformerStack {
 public:
  TransformerStack(ParameterStore<T>& store, const std::string& prefix, const TransformerConfig& cfg, bool decoder)
      : cfg_(cfg), decoder_(decoder) {
    cfg_.validate();
    const std::size_t d = cfg_.hidden_size;
    const std::size_t ff = d * cfg_.ff_multiplier;
    for (std::size_t l = 0; l < cfg_.num_layers; ++l) {
      const std::string p = prefix + ".layer" + std::to_string(l);
      Layer layer;
      layer.self_attn = make_attention(store, p + ".self_attn");
      layer.ln_attn = make_norm(store, p + ".ln_attn");
      if (decoder_) {
        layer.cross_attn = make_attention(store, p + ".cross_attn");
        layer.ln_cross = make_norm(store, p + ".ln_cross");
      }
      layer.ln_ff = make_norm(store, p + ".ln_ff");
      layer.ff_in_w = store.add_uniform(p + ".ff.w_in", d, ff, d);
      layer.ff_in_b = store.add_constant(p + ".ff.b_in", 1, ff, T(0));
      layer.ff_out_w = store.add_uniform(p + ".ff.w_out", ff, d, ff);
      layer.ff_out_b = store.add_constant(p + ".ff.b_out", 1, d, T(0));
      layers_.push_back(std::move(layer));
    }
    final_norm_ = make_norm(store, prefix + ".ln_final");
  }

  const TransformerConfig& config() const { return cfg_; }

  /// Bidirectional encoder over packed sequences.
  Var<T> encode(Graph<T>& g, Var<T> x, const PackedLayout& layout, std::mt19937_64* rng = nullptr) const {
    check_input(x, layout.rows());
    AttentionLayout self = self_layout(layout, false);
    for (const auto& layer : layers_) {
      x = residual_attention(g, x, x, layer.self_attn, layer.ln_attn, self, rng, true);
      x = residual_ff(g, x, layer, rng);
    }
    return g.layer_norm(x, final_norm_.gamma, final_norm_.beta);
  }

  /// Causal decoder over packed target prefixes, attending to `memory`.
  /// Target segment s reads memory segment s.
  Var<T> decode(Graph<T>& g, Var<T> y, const PackedLayout& target, const Var<T>& memory, const PackedLayout& mem,
                std::mt19937_64* rng = nullptr) const {
    if (!decoder_) throw NumericError("decode called on an encoder stack");
    check_input(y, target.rows());
    // memory segments may repeat (several prefixes reading one context), so validate
    // against the per-row mask instead of the segment extent
    check_input(memory, mem.valid.size());
    for (const auto& s : mem.segments)
      if (s.offset + s.length > mem.valid.size()) throw NumericError("decoder: memory segment out of range");
    if (target.segments.size() != mem.segments.size())
      throw NumericError("decoder: target/memory segment count mismatch");
    AttentionLayout self = self_layout(target, true);
    AttentionLayout cross;
    cross.queries = target.segments;
    cross.keys = mem.segments;
    cross.key_valid = mem.valid;
    cross.num_heads = cfg_.num_heads;
    for (const auto& layer : layers_) {
      y = residual_attention(g, y, y, layer.self_attn, layer.ln_attn, self, rng, true);
      y = residual_attention(g, y, memory, layer.cross_attn, layer.ln_cross, cross, rng, false);
      y = residual_ff(g, y, layer, rng);
    }
    return g.layer_norm(y, final_norm_.gamma, final_norm_.beta);
  }

 private:
  struct Attention {
    Var<T> wq, bq, wk, bk, wv, bv, wo, bo;
  };
  struct Norm {
    Var<T> gamma, beta;
  };
  struct Layer {
    Attention self_attn, cross_attn;
    Norm ln_attn, ln_cross, ln_ff;
    Var<T> ff_in_w, ff_in_b, ff_out_w, ff_out_b;
  };

  Attention make_attention(ParameterStore<T>& store, const std::string& p) const {
    const std::size_t d = cfg_.hidden_size;
    Attention a;
    a.wq = store.add_uniform(p + ".wq", d, d, d);
    a.bq = store.add_constant(p + ".bq", 1, d, T(0));
    a.wk = store.add_uniform(p + ".wk", d, d, d);
    a.bk = store.add_constant(p + ".bk", 1, d, T(0));
    a.wv = store.add_uniform(p + ".wv", d, d, d);
    a.bv = store.add_constant(p + ".bv", 1, d, T(0));
    a.wo = store.add_uniform(p + ".wo", d, d, d);
    a.bo = store.add_constant(p + ".bo", 1, d, T(0));
    return a;
  }

  Norm make_norm(ParameterStore<T>& store, const std::string& p) const {
    return {store.add_constant(p + ".gamma", 1, cfg_.hidden_size, T(1)),
            store.add_constant(p + ".beta", 1, cfg_.hidden_size, T(0))};
  }

  void check_input(const Var<T>& x, std::size_t rows) const {
    if (x->value.cols != cfg_.hidden_size || x->value.rows != rows)
      throw NumericError("transformer input " + x->value.shape_string() + " does not match layout rows " +
                         std::to_string(rows) + " x hidden " + std::to_string(cfg_.hidden_size));
  }

  AttentionLayout self_layout(const PackedLayout& layout, bool causal) const {
    AttentionLayout a;
    a.queries = layout.segments;
    a.keys = layout.segments;
    a.key_valid = layout.valid;
    a.causal = causal;
    a.num_heads = cfg_.num_heads;
    return a;
  }

  Var<T> maybe_dropout(Graph<T>& g, const Var<T>& x, std::mt19937_64* rng) const {
    if (!rng || cfg_.dropout <= 0.0) return x;
    return g.dropout(x, static_cast<T>(cfg_.dropout), *rng);
  }

  Var<T> residual_attention(Graph<T>& g, const Var<T>& x, const Var<T>& kv_source, const Attention& a, const Norm& n,
                            const AttentionLayout& layout, std::mt19937_64* rng, bool self) const {
    Var<T> h = g.layer_norm(x, n.gamma, n.beta);
    Var<T> kv = self ? h : kv_source;
    Var<T> q = g.linear(h, a.wq, a.bq);
    Var<T> k = g.linear(kv, a.wk, a.bk);
    Var<T> v = g.linear(kv, a.wv, a.bv);
    Var<T> o = g.linear(g.attention(q, k, v, layout), a.wo, a.bo);
    return g.add(x, maybe_dropout(g, o, rng));
  }

  Var<T> residual_ff(Graph<T>& g, const Var<T>& x, const Layer& layer, std::mt19937_64* rng) const {
    Var<T> h = g.layer_norm(x, layer.ln_ff.gamma, layer.ln_ff.beta);
    h = g.gelu(g.linear(h, layer.ff_in_w, layer.ff_in_b));
    h = g.linear(h, layer.ff_out_w, layer.ff_out_b);
    return g.add(x, maybe_dropout(g, h, rng));
  }

  TransformerConfig cfg_;
  bool decoder_;
  std::vector<Layer> layers_;
  Norm final_norm_;
};

}  // namespace mcp::nn
