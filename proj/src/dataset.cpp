#include "semsr/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <unordered_set>

#include <json.hpp>

namespace semsr {

using nlohmann::json;

Catalog::Catalog(std::vector<ItemMeta> items) : items_(std::move(items)) {
  if (items_.empty()) throw DataError("catalog must contain at least one item");
  index_.reserve(items_.size());
  for (std::size_t i = 0; i < items_.size(); ++i) {
    const auto& meta = items_[i];
    if (meta.id.empty()) throw DataError("item at position " + std::to_string(i) + " has an empty id");
    if (meta.title.empty()) throw DataError("item '" + meta.id + "' has an empty title");
    if (!index_.emplace(meta.id, static_cast<ItemIndex>(i)).second) {
      throw DataError("duplicate item id '" + meta.id + "'");
    }
  }
}

std::optional<ItemIndex> Catalog::find(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

ItemIndex Catalog::index_of(const std::string& id) const {
  auto found = find(id);
  if (!found) throw DataError("unknown item id '" + id + "'");
  return *found;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

namespace {

template <typename LineFn>
void for_each_json_line(const std::string& path, LineFn&& fn) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  std::size_t records = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path, line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(path, line_no, "expected a JSON object");
    try {
      fn(record, line_no);
    } catch (const json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
    ++records;
  }
  if (records == 0) throw IoError("'" + path + "' contains no records");
}

std::optional<std::string> optional_string(const json& record, const char* key) {
  auto it = record.find(key);
  if (it == record.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

std::string item_id_string(const json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw json::type_error::create(302, "item ids must be strings or integers", &value);
}

}  // namespace

SessionLog ingest_sessions(const std::string& path) {
  SessionLog log;
  std::unordered_map<std::string, std::size_t> first_seen;
  for_each_json_line(path, [&](const json& record, std::size_t line_no) {
    if (!record.contains("session_id")) throw ParseError(path, line_no, "missing field 'session_id'");
    if (!record.contains("items")) throw ParseError(path, line_no, "missing field 'items'");
    const auto& items = record.at("items");
    if (!items.is_array()) throw ParseError(path, line_no, "'items' must be an array");
    RawSession session;
    session.id = item_id_string(record.at("session_id"));
    session.user_id = optional_string(record, "user_id");
    for (const auto& item : items) session.items.push_back(item_id_string(item));
    if (session.items.empty()) throw ParseError(path, line_no, "'items' is empty");
    auto [it, inserted] = first_seen.emplace(session.id, line_no);
    if (!inserted) {
      log.warnings.push_back("duplicate session_id '" + session.id + "' at line " + std::to_string(line_no) +
                             " (first seen at line " + std::to_string(it->second) + "); both kept");
    }
    log.sessions.push_back(std::move(session));
  });
  return log;
}

std::vector<ItemMeta> ingest_metadata(const std::string& path) {
  std::vector<ItemMeta> items;
  for_each_json_line(path, [&](const json& record, std::size_t line_no) {
    if (!record.contains("id")) throw ParseError(path, line_no, "missing field 'id'");
    if (!record.contains("title")) throw ParseError(path, line_no, "missing field 'title'");
    ItemMeta meta;
    meta.id = item_id_string(record.at("id"));
    meta.title = record.at("title").get<std::string>();
    if (meta.id.empty() || meta.title.empty()) throw ParseError(path, line_no, "'id' and 'title' must be non-empty");
    meta.brand = optional_string(record, "brand");
    meta.category = optional_string(record, "category");
    meta.color = optional_string(record, "color");
    meta.description = optional_string(record, "description");
    if (auto it = record.find("price"); it != record.end() && !it->is_null()) meta.price = it->get<double>();
    items.push_back(std::move(meta));
  });
  return items;
}

Preprocessed preprocess(const std::vector<RawSession>& sessions, const std::vector<ItemMeta>& metadata,
                        const PreprocessOptions& options) {
  if (options.min_item_freq < 1) throw UsageError("min_item_freq must be at least 1");
  if (options.min_session_len < 2) throw UsageError("min_session_len must be at least 2");

  std::unordered_map<std::string, std::size_t> meta_pos;
  for (std::size_t i = 0; i < metadata.size(); ++i) {
    if (!meta_pos.emplace(metadata[i].id, i).second) throw DataError("duplicate item id '" + metadata[i].id + "'");
  }

  // Work on metadata positions so the fixed-point loop never touches strings.
  std::set<std::string> unknown;
  std::vector<std::vector<std::size_t>> work;
  std::vector<const RawSession*> origin;
  work.reserve(sessions.size());
  for (const auto& raw : sessions) {
    std::vector<std::size_t> items;
    items.reserve(raw.items.size());
    for (const auto& id : raw.items) {
      auto it = meta_pos.find(id);
      if (it == meta_pos.end()) {
        unknown.insert(id);
      } else {
        items.push_back(it->second);
      }
    }
    work.push_back(std::move(items));
    origin.push_back(&raw);
  }

  Preprocessed out;
  std::vector<char> alive(work.size(), 1);
  std::vector<std::size_t> freq(metadata.size());
  for (bool changed = true; changed;) {
    changed = false;
    ++out.rounds;
    std::fill(freq.begin(), freq.end(), 0);
    for (std::size_t s = 0; s < work.size(); ++s) {
      if (!alive[s]) continue;
      for (auto item : work[s]) ++freq[item];
    }
    for (std::size_t s = 0; s < work.size(); ++s) {
      if (!alive[s]) continue;
      auto& items = work[s];
      const auto before = items.size();
      std::erase_if(items, [&](std::size_t item) { return freq[item] < options.min_item_freq; });
      if (items.size() != before) changed = true;
      if (items.size() < options.min_session_len) {
        alive[s] = 0;
        changed = true;
      }
    }
  }

  std::vector<char> used(metadata.size(), 0);
  for (std::size_t s = 0; s < work.size(); ++s) {
    if (!alive[s]) continue;
    for (auto item : work[s]) used[item] = 1;
  }
  std::vector<ItemMeta> kept;
  std::vector<ItemIndex> dense(metadata.size(), 0);
  for (std::size_t i = 0; i < metadata.size(); ++i) {
    if (!used[i]) continue;
    dense[i] = static_cast<ItemIndex>(kept.size());
    kept.push_back(metadata[i]);
  }
  if (kept.empty()) throw DataError("empty dataset: every session was filtered out");

  out.catalog = Catalog(std::move(kept));
  for (std::size_t s = 0; s < work.size(); ++s) {
    if (!alive[s]) continue;
    Session session;
    session.id = origin[s]->id;
    session.user_id = origin[s]->user_id;
    session.items.reserve(work[s].size());
    for (auto item : work[s]) session.items.push_back(dense[item]);
    out.sessions.push_back(std::move(session));
  }
  out.unknown_items.assign(unknown.begin(), unknown.end());
  return out;
}

Splits split_by_user(std::vector<Session> sessions, const SplitRatios& ratios, std::uint64_t seed) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double x : r) {
    if (!(x >= 0.0)) throw UsageError("split ratios must be non-negative");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw UsageError("split ratios must sum to 1");

  std::vector<std::string> keys;
  {
    std::unordered_set<std::string> seen;
    for (const auto& s : sessions) {
      if (seen.insert(s.group_key()).second) keys.push_back(s.group_key());
    }
  }
  if (keys.size() < 3) throw DataError("split_by_user needs at least 3 distinct user/session keys");

  const std::uint64_t salt = fnv1a64(std::string_view("split:")) ^ (seed * 0x9e3779b97f4a7c15ULL);
  std::sort(keys.begin(), keys.end(), [&](const std::string& a, const std::string& b) {
    const auto ha = fnv1a64(a, salt);
    const auto hb = fnv1a64(b, salt);
    return ha != hb ? ha < hb : a < b;
  });

  // Largest-remainder apportionment of whole keys.
  const auto total = keys.size();
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> remainder{};
  std::size_t assigned = 0;
  for (int i = 0; i < 3; ++i) {
    const double exact = r[i] * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    remainder[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total; ++i, ++assigned) ++counts[order[i % 3]];
  // Every split with a positive ratio gets at least one key.
  for (int i = 0; i < 3; ++i) {
    if (counts[i] == 0 && r[i] > 0.0) {
      auto largest = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      --counts[largest];
      ++counts[i];
    }
  }

  std::unordered_map<std::string, Split> assignment;
  std::size_t pos = 0;
  const std::array<Split, 3> labels{Split::train, Split::val, Split::test};
  for (int i = 0; i < 3; ++i) {
    for (std::size_t k = 0; k < counts[i]; ++k) assignment[keys[pos++]] = labels[i];
  }

  Splits out;
  for (auto& s : sessions) {
    s.split = assignment.at(s.group_key());
    switch (s.split) {
      case Split::train: out.train.push_back(std::move(s)); break;
      case Split::val: out.val.push_back(std::move(s)); break;
      case Split::test: out.test.push_back(std::move(s)); break;
    }
  }
  return out;
}

std::vector<Example> expand_incremental(std::span<const Session> sessions) {
  std::vector<Example> examples;
  for (const auto& s : sessions) {
    const auto m = s.items.size();
    if (m < 2) continue;
    if (s.split == Split::train) {
      for (std::size_t k = 1; k < m; ++k) {
        examples.push_back({{s.items.begin(), s.items.begin() + static_cast<std::ptrdiff_t>(k)}, s.items[k]});
      }
    } else {
      examples.push_back({{s.items.begin(), s.items.end() - 1}, s.items.back()});
    }
  }
  return examples;
}

DatasetStats compute_stats(const Splits& splits, const Catalog& catalog) {
  DatasetStats st;
  st.train_sessions = splits.train.size();
  st.val_sessions = splits.val.size();
  st.test_sessions = splits.test.size();
  st.train_examples = expand_incremental(splits.train).size();
  st.val_examples = expand_incremental(splits.val).size();
  st.test_examples = expand_incremental(splits.test).size();
  st.items = catalog.size();
  std::size_t total_len = 0;
  std::size_t total_sessions = 0;
  for (const auto* part : {&splits.train, &splits.val, &splits.test}) {
    for (const auto& s : *part) total_len += s.items.size();
    total_sessions += part->size();
  }
  st.avg_session_length = total_sessions ? static_cast<double>(total_len) / static_cast<double>(total_sessions) : 0.0;
  return st;
}

std::string session_to_json_line(const Session& session, const Catalog& catalog) {
  json record;
  record["session_id"] = session.id;
  if (session.user_id) record["user_id"] = *session.user_id;
  json items = json::array();
  for (auto i : session.items) items.push_back(catalog.item(i).id);
  record["items"] = std::move(items);
  return record.dump();
}

std::string item_to_json_line(const ItemMeta& item) {
  json record;
  record["id"] = item.id;
  record["title"] = item.title;
  if (item.brand) record["brand"] = *item.brand;
  if (item.category) record["category"] = *item.category;
  if (item.price) record["price"] = *item.price;
  if (item.color) record["color"] = *item.color;
  if (item.description) record["description"] = *item.description;
  return record.dump();
}

std::vector<Session> load_split(const std::string& path, const Catalog& catalog, Split split) {
  auto log = ingest_sessions(path);
  std::vector<Session> out;
  out.reserve(log.sessions.size());
  for (auto& raw : log.sessions) {
    Session s;
    s.id = std::move(raw.id);
    s.user_id = std::move(raw.user_id);
    s.split = split;
    for (const auto& id : raw.items) s.items.push_back(catalog.index_of(id));
    out.push_back(std::move(s));
  }
  return out;
}

std::string metadata_text(const ItemMeta& item) {
  std::string text = item.title;
  auto append = [&](const char* label, const std::optional<std::string>& value) {
    if (value && !value->empty()) text += std::string(" | ") + label + ": " + *value;
  };
  append("brand", item.brand);
  append("category", item.category);
  if (item.price) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", *item.price);
    text += std::string(" | price: ") + buf;
  }
  append("color", item.color);
  append("description", item.description);
  return text;
}

}  // namespace semsr
