#include "semsr/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

namespace semsr {

VectorIndex::VectorIndex(Matrix rows) : rows_(std::move(rows)) {}

VectorIndex build_index(const Matrix& table) {
  if (table.rows() < 1) throw DataError("cannot index an empty table");
  require_finite("index_rows", table);
  Matrix rows = table;
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const double norm = rows.row(i).norm();
    if (norm == 0.0) throw DataError("cannot index item " + std::to_string(i) + ": zero-norm row");
    rows.row(i) /= norm;
  }
  return VectorIndex(std::move(rows));
}

RankedList VectorIndex::query(const Vector& vector, std::size_t k) const {
  if (static_cast<std::size_t>(vector.size()) != width()) {
    throw UsageError("query width " + std::to_string(vector.size()) + " does not match index width " +
                     std::to_string(width()));
  }
  if (!vector.allFinite()) throw NumericError("non-finite query vector");
  const double norm = vector.norm();
  if (norm == 0.0) throw DataError("cannot query with a zero vector");
  const Vector scores = rows_ * (vector / norm);
  return top_k(scores, k);
}

RankedList rerank(const RankedList& candidates, std::span<const double> ranker_scores, std::size_t k) {
  if (k > candidates.size()) {
    throw UsageError("rerank: K=" + std::to_string(k) + " exceeds the " + std::to_string(candidates.size()) +
                     " candidates");
  }
  RankedList out;
  out.entries.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto item = candidates.entries[i].item;
    if (item >= ranker_scores.size()) {
      throw DataError("rerank: no ranker score for candidate item " + std::to_string(item));
    }
    if (std::isnan(ranker_scores[item])) throw NumericError("rerank: NaN ranker score for item " + std::to_string(item));
    out.entries.push_back({item, ranker_scores[item]});
  }
  std::sort(out.entries.begin(), out.entries.end(), ranks_before);
  return out;
}

void write_candidates(const std::string& path, std::span<const CandidateRecord> records) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  for (const auto& r : records) {
    nlohmann::ordered_json line;
    line["example"] = r.example;
    std::vector<ItemIndex> items;
    std::vector<double> scores;
    for (const auto& e : r.ranked.entries) {
      items.push_back(e.item);
      scores.push_back(e.score);
    }
    line["items"] = items;
    line["scores"] = scores;
    if (r.target) line["target"] = *r.target;
    out << line.dump() << '\n';
  }
  if (!out) throw IoError("short write to '" + path + "'");
}

std::vector<CandidateRecord> read_candidates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<CandidateRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CandidateRecord r;
      r.example = j.at("example").get<std::size_t>();
      const auto items = j.at("items").get<std::vector<ItemIndex>>();
      const auto scores = j.at("scores").get<std::vector<double>>();
      if (items.size() != scores.size()) throw ParseError(path, line_no, "'items' and 'scores' differ in length");
      std::unordered_set<ItemIndex> seen;
      for (std::size_t i = 0; i < items.size(); ++i) {
        if (!seen.insert(items[i]).second) throw ParseError(path, line_no, "duplicate item in candidate list");
        r.ranked.entries.push_back({items[i], scores[i]});
      }
      if (auto it = j.find("target"); it != j.end()) r.target = it->get<ItemIndex>();
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path, line_no, e.what());
    }
  }
  if (records.empty()) throw IoError("'" + path + "' contains no candidate lists");
  return records;
}

}  // namespace semsr
