#include "semsr/backbone.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace semsr {

namespace {

constexpr double kMinNorm = 1e-12;

Matrix normalized_rows(const Matrix& items, Prefix prefix) {
  Matrix rows = gather_rows(items, prefix);
  for (Eigen::Index j = 0; j < rows.rows(); ++j) rows.row(j) /= std::max(rows.row(j).norm(), kMinNorm);
  return rows;
}

struct Registry {
  std::mutex mutex;
  std::map<std::string, BackboneFactory> factories;
};

Registry& registry() {
  static Registry r;
  static const bool seeded = [] {
    r.factories[AttnNiserBackbone::kKey] = [](std::size_t width, std::mt19937_64& rng) -> std::unique_ptr<Backbone> {
      const double scale = 1.0 / std::sqrt(static_cast<double>(width));
      return std::make_unique<AttnNiserBackbone>(AttentionParams::random(width, rng, scale));
    };
    return true;
  }();
  (void)seeded;
  return r;
}

}  // namespace

Vector normalize_backward(const Vector& raw, const Vector& grad_normalized) {
  const double norm = std::max(raw.norm(), kMinNorm);
  const Vector y = raw / norm;
  return (grad_normalized - y * y.dot(grad_normalized)) / norm;
}

Vector AttnNiserBackbone::encode(Prefix prefix, const Matrix& items) const {
  Vector out = attend(params_, normalized_rows(items, prefix));
  out /= std::max(out.norm(), kMinNorm);
  return out;
}

void AttnNiserBackbone::backward(Prefix prefix, const Matrix& items, const Vector& grad_out, Backbone& grads,
                                 SparseRowGrads& item_grads) const {
  auto& target = dynamic_cast<AttnNiserBackbone&>(grads);
  AttentionTrace trace;
  const Vector raw_out = attend(params_, normalized_rows(items, prefix), &trace);
  const Vector grad_raw_out = normalize_backward(raw_out, grad_out);
  Matrix grad_rows;
  attend_backward(params_, trace, grad_raw_out, target.params_, grad_rows);
  for (std::size_t j = 0; j < prefix.size(); ++j) {
    const Vector raw = items.row(prefix[j]).transpose();
    item_grads.add(prefix[j], normalize_backward(raw, grad_rows.row(static_cast<Eigen::Index>(j)).transpose()));
  }
}

void register_backbone(const std::string& key, BackboneFactory factory) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  r.factories[key] = std::move(factory);
}

std::unique_ptr<Backbone> make_backbone(const std::string& key, std::size_t width, std::mt19937_64& rng) {
  auto& r = registry();
  BackboneFactory factory;
  {
    std::lock_guard lock(r.mutex);
    auto it = r.factories.find(key);
    if (it == r.factories.end()) throw UsageError("unknown backbone '" + key + "'");
    factory = it->second;
  }
  return factory(width, rng);
}

std::vector<std::string> backbone_keys() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> keys;
  for (const auto& [key, _] : r.factories) keys.push_back(key);
  return keys;
}

}  // namespace semsr
