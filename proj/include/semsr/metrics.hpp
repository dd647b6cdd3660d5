#pragma once

#include <map>
#include <string>
#include <vector>

#include "semsr/dataset.hpp"
#include "semsr/ranked_list.hpp"

namespace semsr {

class Scorer;

int recall_at_k(const RankedList& ranked, ItemIndex target, std::size_t k);
/// 1/rank for a hit within the first k entries (1-based rank), else 0.
double rr_at_k(const RankedList& ranked, ItemIndex target, std::size_t k);

struct CutoffMetrics {
  double recall = 0.0;
  double mrr = 0.0;
};

struct EvalResult {
  std::map<std::size_t, CutoffMetrics> per_k;
  std::size_t example_count = 0;
};

inline const std::vector<std::size_t> kDefaultCutoffs{20, 100};

/// Means over examples, summed in input order.
EvalResult evaluate(std::span<const RankedList> lists, std::span<const ItemIndex> targets,
                    const std::vector<std::size_t>& cutoffs = kDefaultCutoffs);

/// Ranks every example with `scorer` (top max(cutoffs), clamped to n) and evaluates.
EvalResult evaluate(const Scorer& scorer, std::span<const Example> examples,
                    const std::vector<std::size_t>& cutoffs = kDefaultCutoffs, std::size_t threads = 1,
                    std::vector<RankedList>* lists_out = nullptr);

std::string render_text(const EvalResult& result, std::string_view title = {});
std::string to_json(const EvalResult& result);

}  // namespace semsr
