#include "semsr/ranked_list.hpp"

#include <algorithm>
#include <cmath>

namespace semsr {

std::vector<ItemIndex> RankedList::items() const {
  std::vector<ItemIndex> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(e.item);
  return out;
}

std::size_t RankedList::rank_of(ItemIndex item) const {
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].item == item) return i + 1;
  }
  return 0;
}

RankedList top_k(std::span<const double> scores, std::size_t k) {
  if (k < 1 || k > scores.size()) {
    throw UsageError("top_k: K=" + std::to_string(k) + " outside [1, " + std::to_string(scores.size()) + "]");
  }
  std::vector<RankedItem> all(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw NumericError("top_k: NaN score for item " + std::to_string(i));
    all[i] = {static_cast<ItemIndex>(i), scores[i]};
  }
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end(), ranks_before);
  all.resize(k);
  return {std::move(all)};
}

}  // namespace semsr
