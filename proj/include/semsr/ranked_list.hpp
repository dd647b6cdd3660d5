#pragma once

#include <vector>

#include "semsr/common.hpp"

namespace semsr {

struct RankedItem {
  ItemIndex item = 0;
  double score = 0.0;
};

/// Items by descending score; equal scores are ordered by ascending index.
struct RankedList {
  std::vector<RankedItem> entries;

  std::size_t size() const { return entries.size(); }
  std::vector<ItemIndex> items() const;
  /// 1-based rank of `item`, or 0 when absent.
  std::size_t rank_of(ItemIndex item) const;
};

inline bool ranks_before(const RankedItem& a, const RankedItem& b) {
  return a.score != b.score ? a.score > b.score : a.item < b.item;
}

RankedList top_k(std::span<const double> scores, std::size_t k);
inline RankedList top_k(const Vector& scores, std::size_t k) {
  return top_k(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())), k);
}

}  // namespace semsr
