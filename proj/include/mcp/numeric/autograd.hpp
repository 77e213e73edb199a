#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mcp/numeric/matrix.hpp"

namespace mcp::nn {

template <typename T>
struct Node {
  Matrix<T> value;
  Matrix<T> grad;
  bool requires_grad = false;
  std::function<void(const Matrix<T>&)> backward;

  Matrix<T>& grad_buffer() {
    if (grad.rows != value.rows || grad.cols != value.cols) grad = Matrix<T>(value.rows, value.cols);
    return grad;
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

/// Leaf tensor that accumulates gradients across graphs (a trainable parameter).
template <typename T>
Var<T> make_leaf(Matrix<T> value, bool requires_grad) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  if (requires_grad) n->grad_buffer();
  return n;
}

/// A contiguous block of rows describing one sequence inside a packed matrix.
struct Segment {
  std::size_t offset = 0;
  std::size_t length = 0;
};

/// Describes which rows attend to which in a packed multi-sequence attention.
/// Query segment s attends only within key segment s.
struct AttentionLayout {
  std::vector<Segment> queries;
  std::vector<Segment> keys;
  std::vector<std::uint8_t> key_valid;  // per key row; empty means all valid
  bool causal = false;
  std::size_t num_heads = 1;

  bool key_allowed(std::size_t key_row, std::size_t qi, std::size_t kj) const {
    if (!key_valid.empty() && !key_valid[key_row]) return false;
    return !causal || kj <= qi;
  }
};

namespace detail {

/// Attention probabilities for every (segment, head), computed exactly as the
/// differentiable op does. Rows with no admissible key put all mass on the
/// key at the query's own index (clamped to the segment).
template <typename T>
std::vector<Matrix<T>> attention_probs(const Matrix<T>& q, const Matrix<T>& k, const AttentionLayout& layout) {
  const std::size_t d = q.cols;
  const std::size_t heads = layout.num_heads;
  const std::size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  std::vector<Matrix<T>> probs;
  probs.reserve(layout.queries.size() * heads);
  for (std::size_t s = 0; s < layout.queries.size(); ++s) {
    const Segment qs = layout.queries[s];
    const Segment ks = layout.keys[s];
    for (std::size_t h = 0; h < heads; ++h) {
      Matrix<T> p(qs.length, ks.length);
      for (std::size_t i = 0; i < qs.length; ++i) {
        const T* qi = q.data.data() + (qs.offset + i) * d + h * dh;
        T mx = -std::numeric_limits<T>::infinity();
        bool any = false;
        for (std::size_t j = 0; j < ks.length; ++j) {
          if (!layout.key_allowed(ks.offset + j, i, j)) continue;
          const T* kj = k.data.data() + (ks.offset + j) * d + h * dh;
          T acc = T(0);
          for (std::size_t c = 0; c < dh; ++c) acc += qi[c] * kj[c];
          p(i, j) = acc * scale;
          mx = any ? std::max(mx, p(i, j)) : p(i, j);
          any = true;
        }
        if (!any) {
          p(i, std::min(i, ks.length - 1)) = T(1);
          continue;
        }
        T total = T(0);
        for (std::size_t j = 0; j < ks.length; ++j) {
          if (!layout.key_allowed(ks.offset + j, i, j)) {
            p(i, j) = T(0);
            continue;
          }
          p(i, j) = std::exp(p(i, j) - mx);
          total += p(i, j);
        }
        for (std::size_t j = 0; j < ks.length; ++j) p(i, j) /= total;
      }
      probs.push_back(std::move(p));
    }
  }
  return probs;
}

}  // namespace detail

/// Reverse-mode tape. Nodes are recorded in creation order; backward walks the
/// tape in reverse. A graph is single-use: build, call backward once, discard.
template <typename T>
class Graph {
 public:
  using V = Var<T>;

  /// With gradients disabled nothing is kept for backward (inference mode).
  explicit Graph(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}

  bool grad_enabled() const { return grad_enabled_; }

  V constant(Matrix<T> value) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    if (grad_enabled_) tape_.push_back(n);
    return n;
  }

  V detach(const V& x) { return constant(x->value); }

  V matmul(const V& a, const V& b) {
    Matrix<T> out;
    gemm(a->value, false, b->value, false, out, false);
    return record(std::move(out), {a, b}, [a, b](const Matrix<T>& g) {
      if (a->requires_grad) gemm(g, false, b->value, true, a->grad_buffer(), true);
      if (b->requires_grad) gemm(a->value, true, g, false, b->grad_buffer(), true);
    });
  }

  /// a * b^T
  V matmul_nt(const V& a, const V& b) {
    Matrix<T> out;
    gemm(a->value, false, b->value, true, out, false);
    return record(std::move(out), {a, b}, [a, b](const Matrix<T>& g) {
      if (a->requires_grad) gemm(g, false, b->value, false, a->grad_buffer(), true);
      if (b->requires_grad) gemm(g, true, a->value, false, b->grad_buffer(), true);
    });
  }

  /// x * w + b (bias broadcast over rows; b may be null).
  V linear(const V& x, const V& w, const V& b) {
    Matrix<T> out;
    gemm(x->value, false, w->value, false, out, false);
    if (b) {
      require_shape(b->value.rows == 1 && b->value.cols == out.cols, "linear(bias)", b->value.shape_string(),
                    out.shape_string());
      for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c) out(r, c) += b->value.data[c];
    }
    std::vector<V> parents{x, w};
    if (b) parents.push_back(b);
    return record(std::move(out), parents, [x, w, b](const Matrix<T>& g) {
      if (x->requires_grad) gemm(g, false, w->value, true, x->grad_buffer(), true);
      if (w->requires_grad) gemm(x->value, true, g, false, w->grad_buffer(), true);
      if (b && b->requires_grad) {
        auto& gb = b->grad_buffer();
        for (std::size_t r = 0; r < g.rows; ++r)
          for (std::size_t c = 0; c < g.cols; ++c) gb.data[c] += g(r, c);
      }
    });
  }

  V add(const V& a, const V& b) {
    require_shape(a->value.same_shape(b->value), "add", a->value.shape_string(), b->value.shape_string());
    Matrix<T> out = a->value;
    add_inplace(out, b->value);
    return record(std::move(out), {a, b}, [a, b](const Matrix<T>& g) {
      if (a->requires_grad) add_inplace(a->grad_buffer(), g);
      if (b->requires_grad) add_inplace(b->grad_buffer(), g);
    });
  }

  V mul(const V& a, const V& b) {
    require_shape(a->value.same_shape(b->value), "mul", a->value.shape_string(), b->value.shape_string());
    Matrix<T> out = a->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->value.data[i];
    return record(std::move(out), {a, b}, [a, b](const Matrix<T>& g) {
      if (a->requires_grad) {
        auto& ga = a->grad_buffer();
        for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * b->value.data[i];
      }
      if (b->requires_grad) {
        auto& gb = b->grad_buffer();
        for (std::size_t i = 0; i < g.data.size(); ++i) gb.data[i] += g.data[i] * a->value.data[i];
      }
    });
  }

  V scale(const V& a, T factor) {
    Matrix<T> out = a->value;
    for (auto& v : out.data) v *= factor;
    return record(std::move(out), {a}, [a, factor](const Matrix<T>& g) {
      auto& ga = a->grad_buffer();
      for (std::size_t i = 0; i < g.data.size(); ++i) ga.data[i] += g.data[i] * factor;
    });
  }

  V sum(const V& a) {
    Matrix<T> out(1, 1);
    for (T v : a->value.data) out.data[0] += v;
    return record(std::move(out), {a}, [a](const Matrix<T>& g) {
      auto& ga = a->grad_buffer();
      for (auto& v : ga.data) v += g.data[0];
    });
  }

  /// Weighted sum of 1x1 scalars.
  V weighted_sum(const std::vector<V>& terms, const std::vector<T>& weights) {
    Matrix<T> out(1, 1);
    for (std::size_t i = 0; i < terms.size(); ++i) out.data[0] += weights[i] * terms[i]->value.data[0];
    return record(std::move(out), terms, [terms, weights](const Matrix<T>& g) {
      for (std::size_t i = 0; i < terms.size(); ++i)
        if (terms[i]->requires_grad) terms[i]->grad_buffer().data[0] += weights[i] * g.data[0];
    });
  }

  /// Tanh-approximated GELU.
  V gelu(const V& x) {
    static constexpr T kC = T(0.7978845608028654);  // sqrt(2/pi)
    static constexpr T kA = T(0.044715);
    Matrix<T> out = x->value;
    for (auto& v : out.data) v = T(0.5) * v * (T(1) + std::tanh(kC * (v + kA * v * v * v)));
    return record(std::move(out), {x}, [x](const Matrix<T>& g) {
      auto& gx = x->grad_buffer();
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        const T v = x->value.data[i];
        const T t = std::tanh(kC * (v + kA * v * v * v));
        const T d = T(0.5) * (T(1) + t) + T(0.5) * v * (T(1) - t * t) * kC * (T(1) + T(3) * kA * v * v);
        gx.data[i] += g.data[i] * d;
      }
    });
  }

  V layer_norm(const V& x, const V& gamma, const V& beta, T eps = T(1e-5)) {
    const std::size_t rows = x->value.rows;
    const std::size_t d = x->value.cols;
    require_shape(gamma->value.cols == d && beta->value.cols == d, "layer_norm", x->value.shape_string(),
                  gamma->value.shape_string());
    Matrix<T> xhat(rows, d);
    std::vector<T> inv_std(rows);
    Matrix<T> out(rows, d);
    for (std::size_t r = 0; r < rows; ++r) {
      auto in = x->value.row(r);
      T mean = T(0);
      for (T v : in) mean += v;
      mean /= static_cast<T>(d);
      T var = T(0);
      for (T v : in) var += (v - mean) * (v - mean);
      var /= static_cast<T>(d);
      inv_std[r] = T(1) / std::sqrt(var + eps);
      for (std::size_t c = 0; c < d; ++c) {
        xhat(r, c) = (in[c] - mean) * inv_std[r];
        out(r, c) = gamma->value.data[c] * xhat(r, c) + beta->value.data[c];
      }
    }
    return record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv_std = std::move(inv_std)](const Matrix<T>& g) {
                    const std::size_t d = xhat.cols;
                    if (gamma->requires_grad) {
                      auto& gg = gamma->grad_buffer();
                      for (std::size_t r = 0; r < g.rows; ++r)
                        for (std::size_t c = 0; c < d; ++c) gg.data[c] += g(r, c) * xhat(r, c);
                    }
                    if (beta->requires_grad) {
                      auto& gb = beta->grad_buffer();
                      for (std::size_t r = 0; r < g.rows; ++r)
                        for (std::size_t c = 0; c < d; ++c) gb.data[c] += g(r, c);
                    }
                    if (!x->requires_grad) return;
                    auto& gx = x->grad_buffer();
                    std::vector<T> dxhat(d);
                    for (std::size_t r = 0; r < g.rows; ++r) {
                      T sum_d = T(0);
                      T sum_dx = T(0);
                      for (std::size_t c = 0; c < d; ++c) {
                        dxhat[c] = g(r, c) * gamma->value.data[c];
                        sum_d += dxhat[c];
                        sum_dx += dxhat[c] * xhat(r, c);
                      }
                      const T n = static_cast<T>(d);
                      for (std::size_t c = 0; c < d; ++c)
                        gx(r, c) += inv_std[r] / n * (n * dxhat[c] - sum_d - xhat(r, c) * sum_dx);
                    }
                  });
  }

  /// Scaled dot-product multi-head attention over packed sequences. Heads split
  /// the column dimension of q/k/v evenly.
  V attention(const V& q, const V& k, const V& v, const AttentionLayout& layout) {
    const std::size_t d = q->value.cols;
    require_shape(k->value.cols == d && v->value.cols == d && k->value.rows == v->value.rows, "attention",
                  q->value.shape_string(), k->value.shape_string());
    if (layout.num_heads == 0 || d % layout.num_heads != 0)
      throw NumericError("attention: hidden size not divisible by head count");
    if (layout.queries.size() != layout.keys.size()) throw NumericError("attention: segment count mismatch");
    if (!layout.key_valid.empty() && layout.key_valid.size() != k->value.rows)
      throw NumericError("attention: key mask does not match key rows");
    auto probs = std::make_shared<std::vector<Matrix<T>>>(detail::attention_probs(q->value, k->value, layout));
    const std::size_t heads = layout.num_heads;
    const std::size_t dh = d / heads;
    Matrix<T> out(q->value.rows, d);
    for (std::size_t s = 0; s < layout.queries.size(); ++s) {
      const Segment qs = layout.queries[s];
      const Segment ks = layout.keys[s];
      for (std::size_t h = 0; h < heads; ++h) {
        const Matrix<T>& p = (*probs)[s * heads + h];
        for (std::size_t i = 0; i < qs.length; ++i) {
          T* oi = out.data.data() + (qs.offset + i) * d + h * dh;
          for (std::size_t j = 0; j < ks.length; ++j) {
            const T pij = p(i, j);
            if (pij == T(0)) continue;
            const T* vj = v->value.data.data() + (ks.offset + j) * d + h * dh;
            for (std::size_t c = 0; c < dh; ++c) oi[c] += pij * vj[c];
          }
        }
      }
    }
    return record(std::move(out), {q, k, v}, [q, k, v, layout, probs](const Matrix<T>& g) {
      const std::size_t d = q->value.cols;
      const std::size_t heads = layout.num_heads;
      const std::size_t dh = d / heads;
      const T scale = T(1) / std::sqrt(static_cast<T>(dh));
      Matrix<T>* gq = q->requires_grad ? &q->grad_buffer() : nullptr;
      Matrix<T>* gk = k->requires_grad ? &k->grad_buffer() : nullptr;
      Matrix<T>* gv = v->requires_grad ? &v->grad_buffer() : nullptr;
      std::vector<T> dp;
      for (std::size_t s = 0; s < layout.queries.size(); ++s) {
        const Segment qs = layout.queries[s];
        const Segment ks = layout.keys[s];
        dp.assign(ks.length, T(0));
        for (std::size_t h = 0; h < heads; ++h) {
          const Matrix<T>& p = (*probs)[s * heads + h];
          for (std::size_t i = 0; i < qs.length; ++i) {
            const T* gi = g.data.data() + (qs.offset + i) * d + h * dh;
            T weighted = T(0);
            for (std::size_t j = 0; j < ks.length; ++j) {
              const T pij = p(i, j);
              if (pij == T(0)) {
                dp[j] = T(0);
                continue;
              }
              const T* vj = v->value.data.data() + (ks.offset + j) * d + h * dh;
              T acc = T(0);
              for (std::size_t c = 0; c < dh; ++c) acc += gi[c] * vj[c];
              dp[j] = acc;
              weighted += pij * acc;
              if (gv) {
                T* gvj = gv->data.data() + (ks.offset + j) * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gvj[c] += pij * gi[c];
              }
            }
            if (!gq && !gk) continue;
            const T* qi = q->value.data.data() + (qs.offset + i) * d + h * dh;
            for (std::size_t j = 0; j < ks.length; ++j) {
              const T pij = p(i, j);
              if (pij == T(0)) continue;
              const T ds = pij * (dp[j] - weighted) * scale;
              if (ds == T(0)) continue;
              const T* kj = k->value.data.data() + (ks.offset + j) * d + h * dh;
              if (gq) {
                T* gqi = gq->data.data() + (qs.offset + i) * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
              }
              if (gk) {
                T* gkj = gk->data.data() + (ks.offset + j) * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
              }
            }
          }
        }
      }
    });
  }

  /// out[r] = table[indices[r]]; gradient scatter-adds back into the table.
  V gather_rows(const V& table, std::vector<std::size_t> indices) {
    const std::size_t d = table->value.cols;
    Matrix<T> out(indices.size(), d);
    for (std::size_t r = 0; r < indices.size(); ++r) {
      if (indices[r] >= table->value.rows)
        throw NumericError("gather_rows: index " + std::to_string(indices[r]) + " out of range for " +
                           table->value.shape_string());
      std::copy_n(table->value.data.data() + indices[r] * d, d, out.data.data() + r * d);
    }
    return record(std::move(out), {table}, [table, indices = std::move(indices)](const Matrix<T>& g) {
      auto& gt = table->grad_buffer();
      const std::size_t d = g.cols;
      for (std::size_t r = 0; r < indices.size(); ++r) {
        T* dst = gt.data.data() + indices[r] * d;
        const T* src = g.data.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += src[c];
      }
    });
  }

  V concat_rows(const std::vector<V>& parts) {
    if (parts.empty()) throw NumericError("concat_rows: no inputs");
    const std::size_t d = parts.front()->value.cols;
    std::size_t rows = 0;
    for (const auto& p : parts) {
      require_shape(p->value.cols == d, "concat_rows", p->value.shape_string(), parts.front()->value.shape_string());
      rows += p->value.rows;
    }
    Matrix<T> out(rows, d);
    std::size_t at = 0;
    for (const auto& p : parts) {
      std::copy(p->value.data.begin(), p->value.data.end(), out.data.begin() + at * d);
      at += p->value.rows;
    }
    return record(std::move(out), parts, [parts](const Matrix<T>& g) {
      std::size_t at = 0;
      for (const auto& p : parts) {
        if (p->requires_grad) {
          auto& gp = p->grad_buffer();
          for (std::size_t i = 0; i < gp.data.size(); ++i) gp.data[i] += g.data[at * g.cols + i];
        }
        at += p->value.rows;
      }
    });
  }

  V slice_rows(const V& x, std::size_t offset, std::size_t count) {
    if (offset + count > x->value.rows) throw NumericError("slice_rows: out of range");
    const std::size_t d = x->value.cols;
    Matrix<T> out(count, d);
    std::copy_n(x->value.data.begin() + offset * d, count * d, out.data.begin());
    return record(std::move(out), {x}, [x, offset](const Matrix<T>& g) {
      auto& gx = x->grad_buffer();
      for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[offset * g.cols + i] += g.data[i];
    });
  }

  /// Mean over the valid rows of each segment; one output row per segment.
  V segment_mean(const V& x, const std::vector<Segment>& segments, const std::vector<std::uint8_t>& row_valid) {
    const std::size_t d = x->value.cols;
    Matrix<T> out(segments.size(), d);
    std::vector<T> inv_counts(segments.size());
    for (std::size_t s = 0; s < segments.size(); ++s) {
      std::size_t count = 0;
      for (std::size_t r = segments[s].offset; r < segments[s].offset + segments[s].length; ++r) {
        if (!row_valid.empty() && !row_valid[r]) continue;
        ++count;
        for (std::size_t c = 0; c < d; ++c) out(s, c) += x->value(r, c);
      }
      if (count == 0) throw NumericError("segment_mean: segment " + std::to_string(s) + " has no valid rows");
      inv_counts[s] = T(1) / static_cast<T>(count);
      for (std::size_t c = 0; c < d; ++c) out(s, c) *= inv_counts[s];
    }
    return record(std::move(out), {x}, [x, segments, row_valid, inv_counts](const Matrix<T>& g) {
      auto& gx = x->grad_buffer();
      const std::size_t d = g.cols;
      for (std::size_t s = 0; s < segments.size(); ++s)
        for (std::size_t r = segments[s].offset; r < segments[s].offset + segments[s].length; ++r) {
          if (!row_valid.empty() && !row_valid[r]) continue;
          for (std::size_t c = 0; c < d; ++c) gx(r, c) += g(s, c) * inv_counts[s];
        }
    });
  }

  /// Unit-normalizes each row. Zero rows map to zero rows (cosine defined as 0).
  V l2_normalize_rows(const V& x) {
    const std::size_t d = x->value.cols;
    Matrix<T> out(x->value.rows, d);
    std::vector<T> norms(x->value.rows);
    for (std::size_t r = 0; r < x->value.rows; ++r) {
      T sq = T(0);
      for (T v : x->value.row(r)) sq += v * v;
      norms[r] = std::sqrt(sq);
      if (norms[r] == T(0)) {
        ++zero_norm_rows_;
        continue;
      }
      for (std::size_t c = 0; c < d; ++c) out(r, c) = x->value(r, c) / norms[r];
    }
    return record(std::move(out), {x}, [x, norms](const Matrix<T>& g) {
      auto& gx = x->grad_buffer();
      const std::size_t d = g.cols;
      for (std::size_t r = 0; r < g.rows; ++r) {
        if (norms[r] == T(0)) continue;
        T dot = T(0);
        for (std::size_t c = 0; c < d; ++c) dot += g(r, c) * x->value(r, c);
        dot /= norms[r];
        for (std::size_t c = 0; c < d; ++c) {
          const T y = x->value(r, c) / norms[r];
          gx(r, c) += (g(r, c) - y * dot) / norms[r];
        }
      }
    });
  }

  /// Mean over counted rows of -log softmax(logits[r])[targets[r]]. Rows with
  /// target < 0 are ignored; columns flagged in `excluded` (same shape as
  /// logits, may be empty) are removed from the softmax support.
  V cross_entropy(const V& logits, const std::vector<long>& targets,
                  const std::vector<std::uint8_t>& excluded = {}) {
    const std::size_t rows = logits->value.rows;
    const std::size_t cols = logits->value.cols;
    if (targets.size() != rows) throw NumericError("cross_entropy: target count does not match logits rows");
    if (!excluded.empty() && excluded.size() != rows * cols) throw NumericError("cross_entropy: bad column mask");
    auto probs = std::make_shared<Matrix<T>>(rows, cols);
    Matrix<T> out(1, 1);
    std::size_t counted = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (targets[r] < 0) continue;
      if (static_cast<std::size_t>(targets[r]) >= cols)
        throw NumericError("cross_entropy: target id " + std::to_string(targets[r]) + " >= " + std::to_string(cols));
      auto in = logits->value.row(r);
      auto pr = probs->row(r);
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t c = 0; c < cols; ++c)
        if (excluded.empty() || !excluded[r * cols + c]) mx = std::max(mx, in[c]);
      T total = T(0);
      for (std::size_t c = 0; c < cols; ++c) {
        if (!excluded.empty() && excluded[r * cols + c]) continue;
        pr[c] = std::exp(in[c] - mx);
        total += pr[c];
      }
      for (auto& p : pr) p /= total;
      out.data[0] -= (in[targets[r]] - mx) - std::log(total);
      ++counted;
    }
    if (counted > 0) out.data[0] /= static_cast<T>(counted);
    return record(std::move(out), {logits}, [logits, targets, probs, counted](const Matrix<T>& g) {
      if (counted == 0) return;
      auto& gl = logits->grad_buffer();
      const T w = g.data[0] / static_cast<T>(counted);
      for (std::size_t r = 0; r < gl.rows; ++r) {
        if (targets[r] < 0) continue;
        for (std::size_t c = 0; c < gl.cols; ++c) gl(r, c) += w * (*probs)(r, c);
        gl(r, targets[r]) -= w;
      }
    });
  }

  V dropout(const V& x, T rate, std::mt19937_64& rng) {
    if (rate <= T(0)) return x;
    std::bernoulli_distribution keep(1.0 - static_cast<double>(rate));
    auto mask = std::make_shared<std::vector<T>>(x->value.data.size());
    const T inv = T(1) / (T(1) - rate);
    Matrix<T> out = x->value;
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      (*mask)[i] = keep(rng) ? inv : T(0);
      out.data[i] *= (*mask)[i];
    }
    return record(std::move(out), {x}, [x, mask](const Matrix<T>& g) {
      auto& gx = x->grad_buffer();
      for (std::size_t i = 0; i < g.data.size(); ++i) gx.data[i] += g.data[i] * (*mask)[i];
    });
  }

  /// Propagates d(loss)/d(node) through the tape into every reachable leaf.
  void backward(const V& loss) {
    if (tape_.empty() || !loss) throw NumericError("backward called before any forward computation");
    if (loss->value.rows != 1 || loss->value.cols != 1)
      throw NumericError("backward requires a scalar loss, got " + loss->value.shape_string());
    if (backward_done_) throw NumericError("backward called twice on the same graph");
    bool found = false;
    for (const auto& n : tape_)
      if (n == loss) {
        found = true;
        break;
      }
    if (!found) throw NumericError("backward: loss was not recorded on this graph");
    backward_done_ = true;
    if (!loss->requires_grad) return;
    loss->grad_buffer().data[0] += T(1);
    for (auto it = tape_.rbegin(); it != tape_.rend(); ++it) {
      Node<T>& n = **it;
      if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
      n.backward(n.grad);
    }
  }

  std::size_t tape_size() const { return tape_.size(); }
  std::size_t zero_norm_rows() const { return zero_norm_rows_; }

 private:
  V record(Matrix<T> value, const std::vector<V>& parents, std::function<void(const Matrix<T>&)> fn) {
    auto n = std::make_shared<Node<T>>();
    n->value = std::move(value);
    if (grad_enabled_)
      for (const auto& p : parents)
        if (p && p->requires_grad) n->requires_grad = true;
    if (n->requires_grad) n->backward = std::move(fn);
    if (grad_enabled_) tape_.push_back(n);
    return n;
  }

  bool grad_enabled_ = true;
  std::vector<V> tape_;
  std::size_t zero_norm_rows_ = 0;
  bool backward_done_ = false;
};

/// Fixed sinusoidal position encodings for positions [0, length).
template <typename T>
Matrix<T> sinusoidal_positions(std::size_t length, std::size_t dim) {
  Matrix<T> pe(length, dim);
  for (std::size_t pos = 0; pos < length; ++pos)
    for (std::size_t i = 0; i < dim; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(dim));
      const double angle = static_cast<double>(pos) * rate;
      pe(pos, i) = static_cast<T>(i % 2 == 0 ? std::sin(angle) : std::cos(angle));
    }
  return pe;
}

}  // namespace mcp::nn
