#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcp/common.hpp"
#include "mcp/corpus/types.hpp"

namespace mcp::corpus {

/// Parameters of the planted-topic persona corpus.
struct SyntheticSpec {
  std::size_t num_users = 20;
  std::size_t num_topics = 4;
  std::size_t responses_per_user = 40;
  std::size_t tokens_per_response = 8;
  std::size_t topic_vocab_size = 24;
  double interlocutor_density = 0.5;  // probability that two same-topic users share an interlocutor
  double two_topic_fraction = 0.2;    // fraction of users given a secondary topic
  double secondary_topic_share = 0.3; // fraction of a two-topic user's sessions on the secondary topic
  double function_word_ratio = 0.25;
  std::size_t private_interlocutors = 4;
  std::size_t max_session_length = 4;
  std::size_t query_tokens = 6;
  std::int64_t short_gap_max = 60;
  std::int64_t long_gap_min = 3600;
  std::int64_t long_gap_max = 86400;
  std::uint64_t seed = 7;

  void validate() const {
    if (num_users < 1 || num_topics < 1 || responses_per_user < 1 || tokens_per_response < 1 ||
        topic_vocab_size < 1 || max_session_length < 1 || query_tokens < 1)
      throw UsageError("synthetic spec: all counts must be >= 1");
    for (double p : {interlocutor_density, two_topic_fraction, secondary_topic_share, function_word_ratio})
      if (p < 0.0 || p > 1.0) throw UsageError("synthetic spec: probabilities must lie in [0, 1]");
    if (short_gap_max < 1 || long_gap_min <= short_gap_max || long_gap_max < long_gap_min)
      throw UsageError("synthetic spec: need 1 <= short_gap_max < long_gap_min <= long_gap_max");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SyntheticSpec, num_users, num_topics, responses_per_user,
                                                tokens_per_response, topic_vocab_size, interlocutor_density,
                                                two_topic_fraction, secondary_topic_share, function_word_ratio,
                                                private_interlocutors, max_session_length, query_tokens,
                                                short_gap_max, long_gap_min, long_gap_max, seed)

/// Ground truth planted by the generator, for analyses and acceptance checks.
struct SyntheticTruth {
  std::map<std::string, std::vector<std::size_t>> user_topics;       // primary topic first
  std::map<std::string, std::vector<std::size_t>> response_topics;   // per triple, chronological
  std::vector<std::pair<std::string, std::string>> planted_pairs;    // users sharing an interlocutor
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SyntheticTruth, user_topics, response_topics, planted_pairs)

struct SyntheticCorpus {
  Corpus corpus;
  SyntheticTruth truth;
};

inline const std::vector<std::string>& function_words() {
  static const std::vector<std::string> words{"the", "a",  "to",   "and",  "of", "is",
                                              "it",  "that", "i", "you", "so", "just"};
  return words;
}

inline std::string topic_word(std::size_t topic, std::size_t j) {
  return "t" + std::to_string(topic) + "w" + std::to_string(j);
}

inline SyntheticCorpus generate_synthetic_corpus(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  auto uniform_index = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  auto chance = [&](double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p; };

  const std::size_t width = std::to_string(spec.num_users - 1).size();
  auto user_name = [&](std::size_t i) {
    std::string s = std::to_string(i);
    return "u" + std::string(width - s.size(), '0') + s;
  };

  SyntheticCorpus out;
  out.corpus.provenance = "synthetic(seed=" + std::to_string(spec.seed) + ")";
  std::vector<std::vector<std::size_t>> topics(spec.num_users);
  for (std::size_t i = 0; i < spec.num_users; ++i) {
    topics[i].push_back(i % spec.num_topics);
    if (spec.num_topics > 1 && chance(spec.two_topic_fraction)) {
      std::size_t other = uniform_index(spec.num_topics - 1);
      if (other >= topics[i][0]) ++other;
      topics[i].push_back(other);
    }
    out.truth.user_topics[user_name(i)] = topics[i];
  }

  std::vector<std::vector<std::string>> shared(spec.num_users);
  for (std::size_t a = 0; a < spec.num_users; ++a)
    for (std::size_t b = a + 1; b < spec.num_users; ++b) {
      if (topics[a][0] != topics[b][0] || !chance(spec.interlocutor_density)) continue;
      const std::string who = "x_" + user_name(a) + "_" + user_name(b);
      shared[a].push_back(who);
      shared[b].push_back(who);
      out.truth.planted_pairs.emplace_back(user_name(a), user_name(b));
    }

  const auto& fw = function_words();
  auto make_query = [&]() {
    std::string q;
    for (std::size_t k = 0; k < spec.query_tokens; ++k) {
      if (!q.empty()) q.push_back(' ');
      q += chance(0.5) ? fw[uniform_index(fw.size())] : "q" + std::to_string(uniform_index(16));
    }
    return q;
  };
  auto make_response = [&](std::size_t topic) {
    std::string r = topic_word(topic, uniform_index(spec.topic_vocab_size));
    for (std::size_t k = 1; k < spec.tokens_per_response; ++k) {
      r.push_back(' ');
      r += chance(spec.function_word_ratio) ? fw[uniform_index(fw.size())]
                                            : topic_word(topic, uniform_index(spec.topic_vocab_size));
    }
    return r;
  };

  for (std::size_t i = 0; i < spec.num_users; ++i) {
    const std::string uid = user_name(i);
    std::vector<std::string> pool;
    for (std::size_t j = 0; j < spec.private_interlocutors; ++j) pool.push_back("p_" + uid + "_" + std::to_string(j));
    pool.insert(pool.end(), shared[i].begin(), shared[i].end());
    if (pool.empty()) pool.push_back("p_" + uid + "_0");

    UserHistory h;
    h.user_id = uid;
    auto& rtopics = out.truth.response_topics[uid];
    std::int64_t t = 1'600'000'000 + static_cast<std::int64_t>(uniform_index(1'000'000));
    std::size_t session = 0;
    while (h.triples.size() < spec.responses_per_user) {
      // shared interlocutors are visited first so every planted link materializes
      const std::string& addressee =
          session < shared[i].size() ? shared[i][session] : pool[uniform_index(pool.size())];
      const std::size_t topic =
          topics[i].size() > 1 && chance(spec.secondary_topic_share) ? topics[i][1] : topics[i][0];
      const std::size_t len = 1 + uniform_index(spec.max_session_length);
      for (std::size_t k = 0; k < len && h.triples.size() < spec.responses_per_user; ++k) {
        if (!h.triples.empty())
          t += k == 0 ? std::uniform_int_distribution<std::int64_t>(spec.long_gap_min, spec.long_gap_max)(rng)
                      : std::uniform_int_distribution<std::int64_t>(1, spec.short_gap_max)(rng);
        h.triples.push_back({uid, make_query(), make_response(topic), t, addressee});
        rtopics.push_back(topic);
      }
      ++session;
    }
    out.corpus.users[uid] = std::move(h);
  }
  // a link only counts once both users have actually replied to the shared interlocutor
  auto replied_to = [&](const std::string& uid, const std::string& who) {
    const auto& tr = out.corpus.users[uid].triples;
    return std::any_of(tr.begin(), tr.end(), [&](const DialogueTriple& d) { return d.addressee_id == who; });
  };
  std::erase_if(out.truth.planted_pairs, [&](const auto& p) {
    const std::string who = "x_" + p.first + "_" + p.second;
    return !replied_to(p.first, who) || !replied_to(p.second, who);
  });
  return out;
}

}  // namespace mcp::corpus
