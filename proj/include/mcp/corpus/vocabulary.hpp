#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mcp/common.hpp"
#include "mcp/corpus/types.hpp"

namespace mcp::corpus {

using TokenId = int;
using TokenIds = std::vector<TokenId>;

/// Lowercases and splits on whitespace and ASCII punctuation. Bytes >= 0x80
/// are treated as word characters so UTF-8 words stay intact.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c) || c == '_') {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kBos = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kUnk = 3;
  static constexpr TokenId kMask = 4;
  static constexpr std::size_t kNumSpecials = 5;

  Vocabulary() {
    for (const char* s : {"<pad>", "<bos>", "<eos>", "<unk>", "<mask>"}) push(s);
  }

  /// Keeps tokens with frequency >= min_freq, most frequent first (ties broken
  /// lexicographically), so that the total size including specials <= max_size.
  static Vocabulary build(const std::map<std::string, std::size_t>& counts, std::size_t min_freq,
                          std::size_t max_size) {
    std::vector<std::pair<std::string, std::size_t>> kept;
    for (const auto& [tok, n] : counts)
      if (n >= min_freq) kept.emplace_back(tok, n);
    std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    Vocabulary v;
    for (const auto& [tok, n] : kept) {
      if (v.size() >= max_size) break;
      v.push(tok);
    }
    return v;
  }

  std::size_t size() const { return tokens_.size(); }

  TokenId id(const std::string& token) const {
    auto it = ids_.find(token);
    return it == ids_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return ids_.count(token) > 0; }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size())
      throw DataError("token id out of range: " + std::to_string(id));
    return tokens_[id];
  }

  static bool is_special(TokenId id) { return id >= 0 && static_cast<std::size_t>(id) < kNumSpecials; }

  /// Never emits specials other than UNK.
  TokenIds tokenize(std::string_view text) const {
    TokenIds out;
    for (const auto& w : split_words(text)) {
      const TokenId t = id(w);
      out.push_back(is_special(t) ? kUnk : t);
    }
    return out;
  }

  /// Joins non-special tokens with single spaces.
  std::string detokenize(const TokenIds& ids) const {
    std::string out;
    for (TokenId t : ids) {
      if (t == kEos) break;
      if (is_special(t) && t != kUnk) continue;
      if (!out.empty()) out.push_back(' ');
      out += token(t);
    }
    return out;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream os(path);
    if (!os) throw DataError("cannot write vocabulary file " + path.string());
    for (const auto& t : tokens_) os << t << '\n';
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot read vocabulary file " + path.string());
    Vocabulary v;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      if (lineno < kNumSpecials) {
        if (line != v.tokens_[lineno])
          throw DataError("vocabulary line " + std::to_string(lineno + 1) + " must be " + v.tokens_[lineno]);
      } else {
        if (v.contains(line)) throw DataError("duplicate vocabulary token: " + line);
        v.push(line);
      }
      ++lineno;
    }
    if (lineno < kNumSpecials) throw DataError("vocabulary file is missing special tokens");
    return v;
  }

  bool operator==(const Vocabulary& o) const { return tokens_ == o.tokens_; }

 private:
  void push(const std::string& tok) {
    ids_[tok] = static_cast<TokenId>(tokens_.size());
    tokens_.push_back(tok);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> ids_;
};

/// Token frequencies over all queries and responses.
inline std::map<std::string, std::size_t> count_tokens(const Corpus& corpus) {
  std::map<std::string, std::size_t> counts;
  for (const auto& [id, h] : corpus.users)
    for (const auto& t : h.triples) {
      for (const auto& w : split_words(t.query_text)) ++counts[w];
      for (const auto& w : split_words(t.response_text)) ++counts[w];
    }
  return counts;
}

inline Vocabulary build_vocabulary(const Corpus& corpus, std::size_t min_freq, std::size_t max_size) {
  return Vocabulary::build(count_tokens(corpus), min_freq, max_size);
}

}  // namespace mcp::corpus
