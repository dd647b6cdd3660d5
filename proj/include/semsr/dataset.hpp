#pragma once

#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semsr/common.hpp"

namespace semsr {

struct ItemMeta {
  std::string id;
  std::string title;
  std::optional<std::string> brand;
  std::optional<std::string> category;
  std::optional<std::string> color;
  std::optional<double> price;
  std::optional<std::string> description;
};

/// The item universe. Dense indices are contiguous 0..n-1 in `items` order.
class Catalog {
 public:
  Catalog() = default;
  explicit Catalog(std::vector<ItemMeta> items);

  std::size_t size() const { return items_.size(); }
  const ItemMeta& item(ItemIndex index) const { return items_.at(index); }
  const std::vector<ItemMeta>& items() const { return items_; }
  std::optional<ItemIndex> find(const std::string& id) const;
  ItemIndex index_of(const std::string& id) const;

 private:
  std::vector<ItemMeta> items_;
  std::unordered_map<std::string, ItemIndex> index_;
};

enum class Split { train, val, test };

std::string_view to_string(Split split);

/// A session as read from the log, still keyed by external item ids.
struct RawSession {
  std::string id;
  std::optional<std::string> user_id;
  std::vector<std::string> items;
};

struct Session {
  std::string id;
  std::optional<std::string> user_id;
  std::vector<ItemIndex> items;
  Split split = Split::train;

  const std::string& group_key() const { return user_id ? *user_id : id; }
};

struct Example {
  std::vector<ItemIndex> prefix;
  ItemIndex target = 0;
};

struct SessionLog {
  std::vector<RawSession> sessions;
  std::vector<std::string> warnings;
};

SessionLog ingest_sessions(const std::string& path);
std::vector<ItemMeta> ingest_metadata(const std::string& path);

struct PreprocessOptions {
  std::size_t min_item_freq = 5;
  std::size_t min_session_len = 2;
};

struct Preprocessed {
  Catalog catalog;
  std::vector<Session> sessions;
  std::vector<std::string> unknown_items;  // referenced by sessions, absent from metadata
  std::size_t rounds = 0;                  // filter passes until the fixed point
};

/// Drops items without metadata, then alternates the item-frequency and
/// session-length filters until neither removes anything. The catalog keeps
/// metadata order restricted to surviving items.
Preprocessed preprocess(const std::vector<RawSession>& sessions, const std::vector<ItemMeta>& metadata,
                        const PreprocessOptions& options = {});

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

struct Splits {
  std::vector<Session> train;
  std::vector<Session> val;
  std::vector<Session> test;
};

/// Assigns whole groups (user id, else session id) to splits in a seeded
/// hash order. Group counts follow largest-remainder apportionment.
Splits split_by_user(std::vector<Session> sessions, const SplitRatios& ratios, std::uint64_t seed);

/// Training sessions expand to every prefix; val/test sessions yield only
/// (all-but-last -> last).
std::vector<Example> expand_incremental(std::span<const Session> sessions);

struct DatasetStats {
  std::size_t train_sessions = 0;
  std::size_t val_sessions = 0;
  std::size_t test_sessions = 0;
  std::size_t train_examples = 0;
  std::size_t val_examples = 0;
  std::size_t test_examples = 0;
  std::size_t items = 0;
  double avg_session_length = 0.0;
};

DatasetStats compute_stats(const Splits& splits, const Catalog& catalog);

// Serialization helpers shared by the CLI.
std::string session_to_json_line(const Session& session, const Catalog& catalog);
std::string item_to_json_line(const ItemMeta& item);
std::vector<Session> load_split(const std::string& path, const Catalog& catalog, Split split);
std::string metadata_text(const ItemMeta& item);

}  // namespace semsr
