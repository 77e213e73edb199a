#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcp/beam_search.hpp"
#include "mcp/corpus/vocabulary.hpp"
#include "mcp/numeric/transformer.hpp"

namespace mcp {

enum class ProfileInjection { kPseudoToken, kAdd };

NLOHMANN_JSON_SERIALIZE_ENUM(ProfileInjection, {{ProfileInjection::kPseudoToken, "pseudo_token"},
                                                {ProfileInjection::kAdd, "profile_add"}})

struct GeneratorOptions {
  ProfileInjection profile_injection = ProfileInjection::kPseudoToken;
  bool tie_embeddings = false;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeneratorOptions, profile_injection, tie_embeddings)

/// Encoder memory for a batch of (profile, query) contexts. In pseudo-token
/// mode row 0 of every segment is the profile.
template <typename T>
struct ContextMemory {
  nn::Var<T> rows;
  nn::PackedLayout layout;
};

/// Profile-conditioned transformer encoder-decoder.
template <typename T>
class Generator {
 public:
  using V = nn::Var<T>;

  Generator(nn::ParameterStore<T>& store, std::size_t vocab_size, const nn::TransformerConfig& cfg,
            GeneratorOptions options = {})
      : cfg_(cfg),
        options_(options),
        vocab_size_(vocab_size),
        embedding_(store.add_uniform("gen.embedding", vocab_size, cfg.hidden_size, cfg.hidden_size)),
        encoder_(store, "gen.enc", cfg, false),
        decoder_(store, "gen.dec", cfg, true),
        out_w_(options.tie_embeddings ? nullptr : store.add_uniform("gen.out.w", cfg.hidden_size, vocab_size, cfg.hidden_size)),
        out_b_(store.add_constant("gen.out.b", 1, vocab_size, T(0))) {}

  std::size_t vocab_size() const { return vocab_size_; }
  const nn::TransformerConfig& config() const { return cfg_; }

  /// M = Enc([U; p]) for each (profile row, query) pair.
  ContextMemory<T> encode_context(nn::Graph<T>& g, const V& profiles, const std::vector<corpus::TokenIds>& queries,
                                  std::mt19937_64* rng = nullptr) const {
    if (profiles->value.rows != queries.size()) throw NumericError("encode_context: one profile per query required");
    if (profiles->value.cols != cfg_.hidden_size) throw NumericError("encode_context: profile width != hidden size");
    const bool pseudo = options_.profile_injection == ProfileInjection::kPseudoToken;
    const std::size_t max_query = pseudo ? cfg_.max_positions - 1 : cfg_.max_positions;
    std::vector<std::size_t> token_ids;
    std::vector<std::size_t> owner;  // profile row of each query token
    ContextMemory<T> mem;
    for (std::size_t b = 0; b < queries.size(); ++b) {
      if (queries[b].empty()) throw DataError("encode_context: empty query");
      const std::size_t len = std::min(queries[b].size(), max_query);
      for (std::size_t i = 0; i < len; ++i) {
        token_ids.push_back(static_cast<std::size_t>(queries[b][i]));
        owner.push_back(b);
      }
      mem.layout.push(len + (pseudo ? 1 : 0));
    }
    V tokens = g.gather_rows(embedding_, token_ids);
    V x;
    if (pseudo) {
      // table = [profiles; token embeddings]; interleave profile then its query tokens
      V table = g.concat_rows({profiles, tokens});
      std::vector<std::size_t> order;
      std::size_t tok = 0;
      for (std::size_t b = 0; b < queries.size(); ++b) {
        order.push_back(b);
        const std::size_t len = mem.layout.segments[b].length - 1;
        for (std::size_t i = 0; i < len; ++i) order.push_back(queries.size() + tok++);
      }
      x = g.gather_rows(table, order);
    } else {
      x = g.add(tokens, g.gather_rows(profiles, owner));
    }
    x = g.add(x, g.constant(nn::packed_positions<T>(mem.layout, cfg_.hidden_size, cfg_.max_positions)));
    mem.rows = encoder_.encode(g, x, mem.layout, rng);
    return mem;
  }

  /// Next-token logits at every prefix position. Prefix s attends to memory
  /// segment `memory_index[s]`.
  V decode_logits(nn::Graph<T>& g, const ContextMemory<T>& mem, const std::vector<corpus::TokenIds>& prefixes,
                  const std::vector<std::size_t>& memory_index, std::mt19937_64* rng = nullptr) const {
    if (prefixes.size() != memory_index.size()) throw NumericError("decode_logits: prefix/memory count mismatch");
    std::vector<std::size_t> ids;
    nn::PackedLayout target;
    nn::PackedLayout memory;
    memory.valid = mem.layout.valid;
    for (std::size_t s = 0; s < prefixes.size(); ++s) {
      if (prefixes[s].empty() || prefixes[s].front() != corpus::Vocabulary::kBos)
        throw NumericError("decoder prefix must begin with BOS");
      if (prefixes[s].size() > cfg_.max_positions)
        throw NumericError("decoder prefix of length " + std::to_string(prefixes[s].size()) + " exceeds max positions");
      for (int t : prefixes[s]) ids.push_back(static_cast<std::size_t>(t));
      target.push(prefixes[s].size());
      memory.segments.push_back(mem.layout.segments.at(memory_index[s]));
    }
    V y = g.gather_rows(embedding_, ids);
    y = g.add(y, g.constant(nn::packed_positions<T>(target, cfg_.hidden_size, cfg_.max_positions)));
    V h = decoder_.decode(g, y, target, mem.rows, memory, rng);
    if (options_.tie_embeddings) {
      V logits = g.matmul_nt(h, embedding_);
      return g.add(logits, g.gather_rows(out_b_, std::vector<std::size_t>(h->value.rows, 0)));
    }
    return g.linear(h, out_w_, out_b_);
  }

  /// Teacher-forced cross-entropy of gold responses (EOS appended, PAD excluded).
  V generation_loss(nn::Graph<T>& g, const V& profiles, const std::vector<corpus::TokenIds>& queries,
                    const std::vector<corpus::TokenIds>& golds, std::size_t max_decode_len,
                    std::mt19937_64* rng = nullptr) const {
    auto mem = encode_context(g, profiles, queries, rng);
    std::vector<corpus::TokenIds> prefixes;
    std::vector<std::size_t> index;
    std::vector<long> targets;
    for (std::size_t b = 0; b < golds.size(); ++b) {
      const std::size_t len = std::min(golds[b].size(), max_decode_len - 1);
      corpus::TokenIds prefix{corpus::Vocabulary::kBos};
      for (std::size_t i = 0; i < len; ++i) {
        prefix.push_back(golds[b][i]);
        targets.push_back(golds[b][i] == corpus::Vocabulary::kPad ? -1 : golds[b][i]);
      }
      targets.push_back(corpus::Vocabulary::kEos);
      prefixes.push_back(std::move(prefix));
      index.push_back(b);
    }
    return g.cross_entropy(decode_logits(g, mem, prefixes, index, rng), targets);
  }

  /// Probability distribution over the vocabulary for the token after `prefix`.
  std::vector<double> decode_step(const ContextMemory<T>& mem, std::size_t memory_index,
                                  const corpus::TokenIds& prefix) const {
    nn::Graph<T> g(false);
    auto logits = decode_logits(g, mem, {prefix}, {memory_index});
    const auto probs = nn::softmax_rows(last_rows(logits->value, {prefix.size()}));
    return {probs.data.begin(), probs.data.end()};
  }

  /// Beam-decodes one context of `mem`.
  Hypothesis generate(const ContextMemory<T>& mem, std::size_t memory_index, const GenerationConfig& gen) const {
    GenerationConfig capped = gen;
    capped.max_decode_len = std::min(gen.max_decode_len, cfg_.max_positions);
    StepFunction step = [&](const std::vector<std::vector<int>>& prefixes) {
      nn::Graph<T> g(false);
      std::vector<std::size_t> lens;
      for (const auto& p : prefixes) lens.push_back(p.size());
      auto logits = decode_logits(g, mem, prefixes, std::vector<std::size_t>(prefixes.size(), memory_index));
      const auto last = last_rows(logits->value, lens);
      std::vector<std::vector<double>> out(prefixes.size(), std::vector<double>(last.cols));
      for (std::size_t r = 0; r < last.rows; ++r) {
        const auto row = last.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double total = 0.0;
        for (T v : row) total += std::exp(static_cast<double>(v) - mx);
        const double lse = mx + std::log(total);
        for (std::size_t c = 0; c < last.cols; ++c) out[r][c] = static_cast<double>(row[c]) - lse;
      }
      return out;
    };
    return beam_search(step, corpus::Vocabulary::kBos, corpus::Vocabulary::kEos, capped);
  }

 private:
  static nn::Matrix<T> last_rows(const nn::Matrix<T>& m, const std::vector<std::size_t>& lens) {
    nn::Matrix<T> out(lens.size(), m.cols);
    std::size_t at = 0;
    for (std::size_t s = 0; s < lens.size(); ++s) {
      at += lens[s];
      std::copy_n(m.data.begin() + (at - 1) * m.cols, m.cols, out.data.begin() + s * m.cols);
    }
    return out;
  }

  nn::TransformerConfig cfg_;
  GeneratorOptions options_;
  std::size_t vocab_size_;
  V embedding_;
  nn::TransformerStack<T> encoder_;
  nn::TransformerStack<T> decoder_;
  V out_w_;
  V out_b_;
};

}  // namespace mcp
