#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcp/mining/augmentation.hpp"
#include "mcp/pipeline/data.hpp"
#include "mcp/pipeline/model.hpp"

namespace mcp::pipeline {

using Vectors = std::vector<std::vector<double>>;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

/// Standardizes each dimension to zero mean and unit variance (constant
/// dimensions become 0) and projects onto the two leading principal axes.
/// Each axis is signed so that its largest-magnitude loading is positive.
inline std::vector<Point2> pca_2d(const Vectors& points) {
  const std::size_t n = points.size();
  if (n < 2) throw DataError("PCA needs at least two points");
  const std::size_t d = points[0].size();
  if (d < 2) throw DataError("PCA needs at least two dimensions");
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i) {
    if (points[i].size() != d) throw DataError("PCA points differ in dimension");
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = points[i][j];
  }
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double sd = std::sqrt(x.col(j).squaredNorm() / static_cast<double>(n - 1));
    if (sd > 1e-12) x.col(j) /= sd;
    else x.col(j).setZero();
  }
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw NumericError("PCA eigendecomposition failed");
  // eigenvalues ascend; the last two columns are the leading axes
  Eigen::MatrixXd axes(static_cast<Eigen::Index>(d), 2);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd v = solver.eigenvectors().col(static_cast<Eigen::Index>(d) - 1 - k);
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(k) = v;
  }
  const Eigen::MatrixXd proj = x * axes;
  std::vector<Point2> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = {proj(static_cast<Eigen::Index>(i), 0), proj(static_cast<Eigen::Index>(i), 1)};
  return out;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

/// Counts of pairwise cosines (i < j) in `bins` equal-width bins over [-1, 1].
struct SimilarityHistogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;
  std::size_t pairs = 0;
};

inline SimilarityHistogram cosine_histogram(const Vectors& v, std::size_t bins) {
  if (v.size() < 2) throw DataError("similarity histogram needs at least two users");
  if (bins < 1) throw UsageError("histogram needs at least one bin");
  SimilarityHistogram h;
  h.counts.assign(bins, 0);
  for (std::size_t b = 0; b <= bins; ++b) h.edges.push_back(-1.0 + 2.0 * static_cast<double>(b) / static_cast<double>(bins));
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      const double c = cosine(v[i], v[j]);
      auto b = static_cast<std::size_t>((c + 1.0) / 2.0 * static_cast<double>(bins));
      ++h.counts[std::min(b, bins - 1)];
      ++h.pairs;
    }
  return h;
}

/// Mean pairwise cosine among same-label and different-label pairs.
struct LabelGap {
  double within = 0.0;
  double cross = 0.0;
  std::size_t within_pairs = 0;
  std::size_t cross_pairs = 0;
  double gap() const { return within - cross; }
};

inline LabelGap label_gap(const Vectors& v, const std::vector<std::size_t>& labels) {
  if (v.size() != labels.size()) throw DataError("label_gap: one label per vector required");
  LabelGap g;
  for (std::size_t i = 0; i < v.size(); ++i)
    for (std::size_t j = i + 1; j < v.size(); ++j) {
      const double c = cosine(v[i], v[j]);
      if (labels[i] == labels[j]) {
        g.within += c;
        ++g.within_pairs;
      } else {
        g.cross += c;
        ++g.cross_pairs;
      }
    }
  if (g.within_pairs) g.within /= static_cast<double>(g.within_pairs);
  if (g.cross_pairs) g.cross /= static_cast<double>(g.cross_pairs);
  return g;
}

template <typename T>
Vectors to_vectors(const nn::Matrix<T>& m) {
  Vectors out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) {
    const auto row = m.row(r);
    out[r].assign(row.begin(), row.end());
  }
  return out;
}

/// Utterance vectors for tokenized responses, encoded in chunks.
template <typename T>
Vectors utterance_vectors(const ProfileEncoder<T>& enc, const std::vector<corpus::TokenIds>& utts,
                          std::size_t chunk = 256) {
  Vectors out;
  for (std::size_t b = 0; b < utts.size(); b += chunk) {
    nn::Graph<T> g(false);
    std::vector<corpus::TokenIds> part(utts.begin() + static_cast<std::ptrdiff_t>(b),
                                       utts.begin() + static_cast<std::ptrdiff_t>(std::min(utts.size(), b + chunk)));
    auto v = to_vectors(enc.encode_utterances(g, part)->value);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

/// Profile of each user from their most recent `history_len` training responses.
template <typename T>
Vectors user_profiles(const ProfileEncoder<T>& enc, const Dataset& d, const std::vector<std::string>& users,
                      std::size_t history_len) {
  Vectors out;
  for (const auto& uid : users) {
    const auto& h = d.train.users.at(uid);
    const auto seq = mining::make_sequence(h, h.size(), history_len, &d.vocab, false);
    nn::Graph<T> g(false);
    auto v = to_vectors(enc.encode_sequences(g, {&seq})->value);
    out.push_back(std::move(v[0]));
  }
  return out;
}

/// Within-topic vs cross-topic cosine of utterance vectors over all training
/// responses, labeled with their planted topic.
template <typename T>
LabelGap utterance_topic_gap(const ProfileEncoder<T>& enc, const Dataset& d) {
  if (!d.truth) throw DataError("topic analysis needs a synthetic corpus with planted topics");
  std::vector<corpus::TokenIds> utts;
  std::vector<std::size_t> labels;
  for (const auto& [uid, h] : d.train.users) {
    const auto& topics = d.truth->response_topics.at(uid);
    for (std::size_t i = 0; i < h.size(); ++i) {
      utts.push_back(d.vocab.tokenize(h.triples[i].response_text));
      labels.push_back(topics.at(i));
    }
  }
  return label_gap(utterance_vectors(enc, utts), labels);
}

/// Mean profile cosine of planted similar-user pairs vs user pairs whose topic
/// sets are disjoint.
struct UserSeparation {
  double similar = 0.0;
  double dissimilar = 0.0;
  std::size_t similar_pairs = 0;
  std::size_t dissimilar_pairs = 0;
  double gap() const { return similar - dissimilar; }
};

template <typename T>
UserSeparation user_separation(const ProfileEncoder<T>& enc, const Dataset& d, std::size_t history_len) {
  if (!d.truth) throw DataError("user separation needs a synthetic corpus with planted pairs");
  std::vector<std::string> users;
  for (const auto& [uid, h] : d.train.users) users.push_back(uid);
  const auto profiles = user_profiles(enc, d, users, history_len);
  auto index = [&](const std::string& u) {
    return static_cast<std::size_t>(std::lower_bound(users.begin(), users.end(), u) - users.begin());
  };
  UserSeparation s;
  std::set<std::pair<std::string, std::string>> planted;
  for (const auto& [a, b] : d.truth->planted_pairs) {
    planted.insert({std::min(a, b), std::max(a, b)});
    s.similar += cosine(profiles[index(a)], profiles[index(b)]);
    ++s.similar_pairs;
  }
  for (std::size_t i = 0; i < users.size(); ++i)
    for (std::size_t j = i + 1; j < users.size(); ++j) {
      const auto& ti = d.truth->user_topics.at(users[i]);
      const auto& tj = d.truth->user_topics.at(users[j]);
      const bool disjoint = std::none_of(ti.begin(), ti.end(), [&](std::size_t t) {
        return std::find(tj.begin(), tj.end(), t) != tj.end();
      });
      if (!disjoint) continue;
      s.dissimilar += cosine(profiles[i], profiles[j]);
      ++s.dissimilar_pairs;
    }
  if (s.similar_pairs) s.similar /= static_cast<double>(s.similar_pairs);
  if (s.dissimilar_pairs) s.dissimilar /= static_cast<double>(s.dissimilar_pairs);
  return s;
}

/// Loads the encoders of a checkpoint, or keeps the seed-determined random
/// initialization when `checkpoint` is empty.
template <typename T>
std::unique_ptr<Model<T>> load_encoders(const RunConfig& cfg, const Dataset& d,
                                        const std::optional<std::filesystem::path>& checkpoint) {
  auto m = std::make_unique<Model<T>>(cfg, d.vocab.size(), false);
  if (checkpoint) nn::load_checkpoint(m->store, *checkpoint, true);
  return m;
}

/// PCA points of selected users' responses and the user-similarity histogram,
/// before and after training; topic statistics when ground truth is known.
template <typename T = float>
nlohmann::json analyze_representations(const RunConfig& cfg, const Dataset& d,
                                       const std::optional<std::filesystem::path>& before,
                                       const std::filesystem::path& after, const std::filesystem::path& out_dir) {
  std::vector<std::string> all_users;
  for (const auto& [uid, h] : d.train.users) all_users.push_back(uid);
  if (all_users.size() < 2) throw DataError("analysis needs at least two users");
  std::vector<std::string> pca_users;
  for (const auto& uid : all_users)
    if (pca_users.size() < cfg.analysis.pca_users && d.train.users.at(uid).size() >= 2) pca_users.push_back(uid);
  std::vector<corpus::TokenIds> utts;
  std::vector<std::string> owners;
  for (const auto& uid : pca_users)
    for (const auto& t : d.train.users.at(uid).triples) {
      utts.push_back(d.vocab.tokenize(t.response_text));
      owners.push_back(uid);
    }
  if (utts.size() < 2) throw DataError("analysis needs at least two responses");
  std::vector<std::string> hist_users(all_users.begin(),
                                      all_users.begin() + static_cast<std::ptrdiff_t>(std::min(all_users.size(), cfg.analysis.max_users)));

  nlohmann::json out;
  out["pca_users"] = pca_users;
  const std::pair<const char*, std::optional<std::filesystem::path>> stages[] = {{"before", before}, {"after", after}};
  for (const auto& [name, ckpt] : stages) {
    const auto model = load_encoders<T>(cfg, d, ckpt);
    const auto points = pca_2d(utterance_vectors(model->encoder, utts));
    nlohmann::json pts = nlohmann::json::array();
    for (std::size_t i = 0; i < points.size(); ++i) pts.push_back({{"user", owners[i]}, {"x", points[i].x}, {"y", points[i].y}});
    out["pca"][name] = pts;
    const auto hist = cosine_histogram(user_profiles(model->encoder, d, hist_users, cfg.miner.history_len),
                                       cfg.analysis.histogram_bins);
    out["similarity_histogram"][name] = {{"edges", hist.edges}, {"counts", hist.counts}, {"pairs", hist.pairs}};
    if (d.truth) {
      const auto gap = utterance_topic_gap(model->encoder, d);
      const auto sep = user_separation(model->encoder, d, cfg.miner.history_len);
      out["topic_gap"][name] = {{"within", gap.within}, {"cross", gap.cross}, {"gap", gap.gap()}};
      out["user_separation"][name] = {{"similar", sep.similar}, {"dissimilar", sep.dissimilar}, {"gap", sep.gap()}};
    }
  }
  std::filesystem::create_directories(out_dir);
  std::ofstream os(out_dir / "analysis.json");
  if (!os) throw DataError("cannot write analysis in " + out_dir.string());
  os << out.dump(2) << '\n';
  return out;
}

}  // namespace mcp::pipeline
