#pragma once

#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "semsr/dataset.hpp"
#include "semsr/embeddings.hpp"
#include "semsr/model.hpp"

namespace semsr::testing {

inline Matrix uniform(Eigen::Index rows, Eigen::Index cols, double lo, double hi, std::mt19937_64& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * unit_uniform(rng);
  return m;
}

inline std::size_t draw(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(hi - lo + 1));
}

/// Model with O(1)-scale random parameters (unit-ish item rows).
inline Model random_model(const ModelConfig& config, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix items = uniform(static_cast<Eigen::Index>(config.n), static_cast<Eigen::Index>(config.d1), -1.0, 1.0, rng);
  return Model::create(config, std::move(items), seed);
}

inline SemanticTable random_semantic(std::size_t n, std::size_t d2, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return SemanticTable(uniform(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d2), -1.0, 1.0, rng));
}

inline std::vector<Example> random_examples(std::size_t count, std::size_t n, std::size_t max_len,
                                            std::mt19937_64& rng) {
  std::vector<Example> out;
  for (std::size_t e = 0; e < count; ++e) {
    Example ex;
    const auto len = draw(rng, 1, max_len);
    for (std::size_t j = 0; j < len; ++j) ex.prefix.push_back(static_cast<ItemIndex>(draw(rng, 0, n - 1)));
    ex.target = static_cast<ItemIndex>(draw(rng, 0, n - 1));
    out.push_back(std::move(ex));
  }
  return out;
}

/// Fresh directory under the system temp dir, removed first if present.
inline std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("semsr_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

}  // namespace semsr::testing
