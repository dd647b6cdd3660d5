#pragma once

// Clustered synthetic catalog and session log. Every item title carries its
// cluster's three topic words plus one item-specific token, so pseudo-encoded
// vectors are a shared cluster centroid plus per-item noise. Sessions stay
// inside one cluster and items are drawn with Zipf popularity. A few items per
// cluster are new arrivals: they occur in validation and test sessions but
// never in training.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "semsr/dataset.hpp"
#include "semsr/embeddings.hpp"

namespace semsr::testing {

struct SyntheticOptions {
  std::size_t clusters = 20;
  std::size_t items_per_cluster = 10;
  std::size_t train_examples = 2000;
  std::size_t val_examples = 200;
  std::size_t test_examples = 500;
  std::size_t min_len = 2;
  std::size_t max_len = 5;
  double zipf = 1.0;
  std::size_t cold_per_cluster = 2;  // new arrivals, absent from training
  std::uint64_t seed = 2024;
};

struct SyntheticData {
  Catalog catalog;
  std::vector<std::size_t> cluster_of;  // per dense index
  std::vector<Session> train_sessions, val_sessions, test_sessions;
  std::vector<Example> train, val, test;
};

inline const std::vector<std::string>& topic_words() {
  static const std::vector<std::string> words{
      "lipstick", "matte",    "rouge",   "shampoo",  "argan",   "volume",  "sunscreen", "mineral", "spf",
      "mascara",  "lash",     "curl",    "serum",    "retinol", "night",   "perfume",   "amber",   "musk",
      "nail",     "lacquer",  "gloss",   "razor",    "blade",   "shave",   "toner",     "witch",   "hazel",
      "brush",    "kabuki",   "blend",   "cleanser", "foam",    "gentle",  "dryer",     "ionic",   "heat",
      "concealer", "cover",   "pore",    "bath",     "salt",    "lavender", "eyeliner", "liquid",  "wing",
      "lotion",   "cocoa",    "butter",  "mask",     "clay",    "charcoal", "tweezer",  "slant",   "steel",
      "hairspray", "hold",    "aerosol", "blush",    "peach",   "powder"};
  return words;
}

inline std::size_t zipf_draw(std::mt19937_64& rng, const std::vector<double>& cdf) {
  const double u = unit_uniform(rng) * cdf.back();
  return static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
}

inline SyntheticData make_synthetic(const SyntheticOptions& o = {}) {
  SyntheticData data;
  std::vector<ItemMeta> items;
  const auto& words = topic_words();
  for (std::size_t c = 0; c < o.clusters; ++c) {
    const auto w = [&](std::size_t k) { return words[(3 * c + k) % words.size()]; };
    for (std::size_t r = 0; r < o.items_per_cluster; ++r) {
      const auto id = "p" + std::to_string(c) + "_" + std::to_string(r);
      items.push_back({id, w(0) + " " + w(1) + " " + w(2) + " sku" + id, {}, {}, {}, {}, {}});
      data.cluster_of.push_back(c);
    }
  }
  data.catalog = Catalog(std::move(items));

  // Popularity rank r has weight 1/(r+1)^zipf. New arrivals take every
  // (items_per_cluster / cold)-th rank so they span head and tail.
  std::vector<double> all_cdf, warm_cdf;
  double all_acc = 0.0, warm_acc = 0.0;
  const std::size_t stride = o.cold_per_cluster ? o.items_per_cluster / o.cold_per_cluster : 0;
  for (std::size_t r = 0; r < o.items_per_cluster; ++r) {
    const double w = 1.0 / std::pow(r + 1.0, o.zipf);
    const bool cold = stride && r % stride == stride / 2 && r / stride < o.cold_per_cluster;
    all_cdf.push_back(all_acc += w);
    warm_cdf.push_back(warm_acc += cold ? 0.0 : w);
  }

  std::mt19937_64 rng(o.seed);
  std::size_t next_id = 0;
  auto session = [&](Split split, std::size_t max_len) {
    const auto c = static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(o.clusters));
    const auto len = o.min_len + static_cast<std::size_t>(unit_uniform(rng) * static_cast<double>(max_len - o.min_len + 1));
    Session s{"s" + std::to_string(next_id), "u" + std::to_string(next_id), {}, split};
    ++next_id;
    const auto& cdf = split == Split::train ? warm_cdf : all_cdf;
    for (std::size_t j = 0; j < len; ++j)
      s.items.push_back(static_cast<ItemIndex>(c * o.items_per_cluster + zipf_draw(rng, cdf)));
    return s;
  };

  std::size_t produced = 0;
  while (produced < o.train_examples) {
    auto s = session(Split::train, std::min(o.max_len, o.train_examples - produced + 1));
    produced += s.items.size() - 1;
    data.train_sessions.push_back(std::move(s));
  }
  for (std::size_t i = 0; i < o.val_examples; ++i) data.val_sessions.push_back(session(Split::val, o.max_len));
  for (std::size_t i = 0; i < o.test_examples; ++i) data.test_sessions.push_back(session(Split::test, o.max_len));
  data.train = expand_incremental(data.train_sessions);
  data.val = expand_incremental(data.val_sessions);
  data.test = expand_incremental(data.test_sessions);
  return data;
}

/// Ranks every item by cosine between its semantic row and the mean of the
/// prefix rows; returns Recall@k over `examples`.
inline double nearest_centroid_recall(const SemanticTable& semantic, const std::vector<Example>& examples,
                                      std::size_t k) {
  const Matrix& m = semantic.values();
  std::size_t hits = 0;
  for (const auto& ex : examples) {
    Vector centroid = Vector::Zero(m.cols());
    for (auto i : ex.prefix) centroid += m.row(i).transpose();
    std::vector<std::pair<double, std::size_t>> scored;
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      scored.emplace_back(-m.row(i).dot(centroid) / (m.row(i).norm() * centroid.norm()), static_cast<std::size_t>(i));
    std::sort(scored.begin(), scored.end());
    for (std::size_t r = 0; r < k; ++r) hits += scored[r].second == ex.target;
  }
  return static_cast<double>(hits) / static_cast<double>(examples.size());
}

/// Writes the log and metadata as the JSONL files `ingest` reads.
inline void write_synthetic_jsonl(const SyntheticData& data, const std::string& sessions_path,
                                  const std::string& metadata_path) {
  std::ofstream meta(metadata_path);
  for (const auto& item : data.catalog.items()) meta << item_to_json_line(item) << "\n";
  std::ofstream log(sessions_path);
  for (const auto* group : {&data.train_sessions, &data.val_sessions, &data.test_sessions}) {
    for (const auto& s : *group) {
      nlohmann::json line{{"session_id", s.id}, {"user_id", *s.user_id}, {"items", nlohmann::json::array()}};
      for (auto i : s.items) line["items"].push_back(data.catalog.item(i).id);
      log << line.dump() << "\n";
    }
  }
}

}  // namespace semsr::testing
