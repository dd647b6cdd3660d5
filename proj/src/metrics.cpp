#include "semsr/metrics.hpp"

#include <algorithm>
#include <cstdio>

#include <json.hpp>

#include "semsr/model.hpp"

namespace semsr {

int recall_at_k(const RankedList& ranked, ItemIndex target, std::size_t k) {
  if (k < 1) throw UsageError("K must be at least 1");
  const auto limit = std::min(k, ranked.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranked.entries[i].item == target) return 1;
  }
  return 0;
}

double rr_at_k(const RankedList& ranked, ItemIndex target, std::size_t k) {
  if (k < 1) throw UsageError("K must be at least 1");
  const auto limit = std::min(k, ranked.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (ranked.entries[i].item == target) return 1.0 / static_cast<double>(i + 1);
  }
  return 0.0;
}

EvalResult evaluate(std::span<const RankedList> lists, std::span<const ItemIndex> targets,
                    const std::vector<std::size_t>& cutoffs) {
  if (lists.empty()) throw DataError("cannot evaluate an empty test set");
  if (lists.size() != targets.size()) throw UsageError("ranked lists and targets differ in length");
  if (cutoffs.empty()) throw UsageError("at least one cutoff K is required");
  EvalResult result;
  result.example_count = lists.size();
  for (auto k : cutoffs) {
    double hits = 0.0;
    double rr = 0.0;
    for (std::size_t e = 0; e < lists.size(); ++e) {
      hits += recall_at_k(lists[e], targets[e], k);
      rr += rr_at_k(lists[e], targets[e], k);
    }
    const auto count = static_cast<double>(lists.size());
    result.per_k[k] = {hits / count, rr / count};
  }
  return result;
}

EvalResult evaluate(const Scorer& scorer, std::span<const Example> examples, const std::vector<std::size_t>& cutoffs,
                    std::size_t threads, std::vector<RankedList>* lists_out) {
  if (examples.empty()) throw DataError("cannot evaluate an empty test set");
  if (cutoffs.empty()) throw UsageError("at least one cutoff K is required");
  const auto depth = std::min(*std::max_element(cutoffs.begin(), cutoffs.end()), scorer.items());
  std::vector<RankedList> lists(examples.size());
  parallel_chunks(examples.size(), 64, threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t e = begin; e < end; ++e) lists[e] = scorer.recommend(examples[e].prefix, depth);
  });
  std::vector<ItemIndex> targets;
  targets.reserve(examples.size());
  for (const auto& ex : examples) targets.push_back(ex.target);
  auto result = evaluate(lists, targets, cutoffs);
  if (lists_out) *lists_out = std::move(lists);
  return result;
}

std::string render_text(const EvalResult& result, std::string_view title) {
  std::string out;
  if (!title.empty()) out += std::string(title) + "\n";
  char line[128];
  std::snprintf(line, sizeof(line), "%-8s %10s %10s\n", "K", "Recall", "MRR");
  out += line;
  for (const auto& [k, m] : result.per_k) {
    std::snprintf(line, sizeof(line), "%-8zu %10.4f %10.4f\n", k, m.recall, m.mrr);
    out += line;
  }
  std::snprintf(line, sizeof(line), "examples: %zu\n", result.example_count);
  out += line;
  return out;
}

std::string to_json(const EvalResult& result) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json ks = nlohmann::ordered_json::object();
  for (const auto& [k, m] : result.per_k) ks[std::to_string(k)] = {{"recall", m.recall}, {"mrr", m.mrr}};
  j["K"] = std::move(ks);
  j["n_examples"] = result.example_count;
  return j.dump(2);
}

}  // namespace semsr
