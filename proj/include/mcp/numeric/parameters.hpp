#pragma once

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mcp/numeric/autograd.hpp"

namespace mcp::nn {

/// Named, registration-ordered collection of trainable tensors.
template <typename T>
class ParameterStore {
 public:
  explicit ParameterStore(std::uint64_t seed = 0) : seed_(seed), rng_(seed) {}

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
  Var<T> add_uniform(const std::string& name, std::size_t rows, std::size_t cols, std::size_t fan_in) {
    Matrix<T> m(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (auto& v : m.data) v = static_cast<T>(dist(rng_));
    return add(name, std::move(m));
  }

  Var<T> add_constant(const std::string& name, std::size_t rows, std::size_t cols, T fill) {
    return add(name, Matrix<T>(rows, cols, fill));
  }

  Var<T> add(const std::string& name, Matrix<T> value) {
    if (index_.count(name)) throw NumericError("parameter registered twice: " + name);
    index_[name] = params_.size();
    params_.emplace_back(name, make_leaf(std::move(value), true));
    return params_.back().second;
  }

  const Var<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw NumericError("unknown parameter: " + name);
    return params_[it->second].second;
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  const std::vector<std::pair<std::string, Var<T>>>& entries() const { return params_; }

  void zero_grad() {
    for (auto& [name, p] : params_)
      std::fill(p->grad_buffer().data.begin(), p->grad_buffer().data.end(), T(0));
  }

  /// Marks every parameter whose name starts with `prefix` as (non-)trainable.
  void set_trainable(const std::string& prefix, bool trainable) {
    for (auto& [name, p] : params_)
      if (name.rfind(prefix, 0) == 0) p->requires_grad = trainable;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p->value.size();
    return n;
  }

  std::uint64_t seed() const { return seed_; }

  /// Copies values for every name present in both stores (shapes must match).
  std::size_t copy_matching_from(const ParameterStore& other) {
    std::size_t copied = 0;
    for (auto& [name, p] : params_) {
      if (!other.contains(name)) continue;
      const auto& src = other.get(name)->value;
      require_shape(src.same_shape(p->value), ("copy " + name).c_str(), src.shape_string(), p->value.shape_string());
      p->value = src;
      ++copied;
    }
    return copied;
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 rng_;
  std::vector<std::pair<std::string, Var<T>>> params_;
  std::map<std::string, std::size_t> index_;
};

namespace detail {

inline std::string param_file_name(const std::string& name) { return name + ".f32"; }

inline void write_f32_le(std::ostream& os, float v) {
  auto bits = std::bit_cast<std::uint32_t>(v);
  char bytes[4];
  for (int i = 0; i < 4; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
  os.write(bytes, 4);
}

inline float read_f32_le(const unsigned char* bytes) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(bytes[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace detail

/// Writes `manifest.json` plus one little-endian float32 file per parameter.
template <typename T>
void save_checkpoint(const ParameterStore<T>& store, const std::filesystem::path& dir, const nlohmann::json& config) {
  std::filesystem::create_directories(dir);
  nlohmann::json manifest;
  manifest["dtype"] = "float32";
  manifest["seed"] = store.seed();
  manifest["config"] = config;
  manifest["parameters"] = nlohmann::json::array();
  for (const auto& [name, p] : store.entries()) {
    manifest["parameters"].push_back(
        {{"name", name}, {"shape", {p->value.rows, p->value.cols}}, {"file", detail::param_file_name(name)}});
    std::ofstream os(dir / detail::param_file_name(name), std::ios::binary);
    if (!os) throw DataError("cannot write checkpoint file in " + dir.string());
    for (T v : p->value.data) detail::write_f32_le(os, static_cast<float>(v));
  }
  std::ofstream ms(dir / "manifest.json");
  ms << manifest.dump(2) << '\n';
}

inline nlohmann::json read_checkpoint_manifest(const std::filesystem::path& dir) {
  std::ifstream ms(dir / "manifest.json");
  if (!ms) throw DataError("checkpoint manifest not found in " + dir.string());
  return nlohmann::json::parse(ms);
}

/// Weight-loading hook: fills every parameter of `store` that has a same-named
/// array in the checkpoint directory. Returns the number of parameters loaded.
/// With `require_all`, a parameter missing from the checkpoint is an error.
template <typename T>
std::size_t load_checkpoint(ParameterStore<T>& store, const std::filesystem::path& dir, bool require_all = false) {
  const auto manifest = read_checkpoint_manifest(dir);
  std::map<std::string, std::pair<std::size_t, std::size_t>> shapes;
  for (const auto& e : manifest.at("parameters"))
    shapes[e.at("name").get<std::string>()] = {e.at("shape")[0].get<std::size_t>(), e.at("shape")[1].get<std::size_t>()};
  std::size_t loaded = 0;
  for (const auto& [name, p] : store.entries()) {
    auto it = shapes.find(name);
    if (it == shapes.end()) {
      if (require_all) throw DataError("checkpoint is missing parameter " + name);
      continue;
    }
    if (it->second.first != p->value.rows || it->second.second != p->value.cols)
      throw DataError("checkpoint shape mismatch for " + name);
    std::ifstream is(dir / detail::param_file_name(name), std::ios::binary);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (bytes.size() != p->value.size() * 4) throw DataError("checkpoint array has wrong size: " + name);
    for (std::size_t i = 0; i < p->value.size(); ++i)
      p->value.data[i] = static_cast<T>(detail::read_f32_le(bytes.data() + 4 * i));
    ++loaded;
  }
  return loaded;
}

}  // namespace mcp::nn
