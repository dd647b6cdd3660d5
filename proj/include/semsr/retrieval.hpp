#pragma once

#include <optional>
#include <string>
#include <vector>

#include "semsr/ranked_list.hpp"

namespace semsr {

/// Exact cosine index: rows stored unit-normalized in dense-index order.
class VectorIndex {
 public:
  explicit VectorIndex(Matrix rows);

  std::size_t size() const { return static_cast<std::size_t>(rows_.rows()); }
  std::size_t width() const { return static_cast<std::size_t>(rows_.cols()); }
  const Matrix& rows() const { return rows_; }

  /// Top-k rows by cosine similarity to `vector`, exact scan.
  RankedList query(const Vector& vector, std::size_t k) const;

 private:
  Matrix rows_;
};

/// Normalizes every row; a zero row is rejected with its index.
VectorIndex build_index(const Matrix& table);

/// Reorders the first `k` candidates by `ranker_scores[item]`, descending.
/// The returned item set equals the first-k candidate set. Ranker scores
/// replace the candidate scores in the output.
RankedList rerank(const RankedList& candidates, std::span<const double> ranker_scores, std::size_t k);

/// One line of the candidate interchange file.
struct CandidateRecord {
  std::size_t example = 0;
  RankedList ranked;
  std::optional<ItemIndex> target;
};

void write_candidates(const std::string& path, std::span<const CandidateRecord> records);
std::vector<CandidateRecord> read_candidates(const std::string& path);

}  // namespace semsr
