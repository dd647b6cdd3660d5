#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "semsr/attention.hpp"
#include "semsr/common.hpp"

namespace semsr {

/// Gradient rows for a handful of table rows, applied in insertion order.
struct SparseRowGrads {
  std::vector<std::pair<ItemIndex, Vector>> rows;
  void add(ItemIndex row, Vector grad) { rows.emplace_back(row, std::move(grad)); }
};

/// Maps a prefix of trainable item rows to the data-driven session vector.
/// Gradient containers are backbones of the same concrete type.
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual std::string key() const = 0;
  virtual std::size_t width() const = 0;
  virtual std::unique_ptr<Backbone> clone() const = 0;
  virtual std::unique_ptr<Backbone> zeros_like() const = 0;
  virtual void append_tensors(const std::string& prefix, std::vector<TensorRef>& out) = 0;

  virtual Vector encode(Prefix prefix, const Matrix& items) const = 0;

  /// Re-runs the forward pass for `prefix`, then accumulates parameter
  /// gradients into `grads` and item-row gradients into `item_grads`.
  virtual void backward(Prefix prefix, const Matrix& items, const Vector& grad_out, Backbone& grads,
                        SparseRowGrads& item_grads) const = 0;
};

/// Reference backbone "attn-niser": the attention pooling run over
/// L2-normalized item rows, with an L2-normalized output.
class AttnNiserBackbone final : public Backbone {
 public:
  static constexpr const char* kKey = "attn-niser";

  explicit AttnNiserBackbone(AttentionParams params) : params_(std::move(params)) {}

  std::string key() const override { return kKey; }
  std::size_t width() const override { return params_.width(); }
  std::unique_ptr<Backbone> clone() const override { return std::make_unique<AttnNiserBackbone>(params_); }
  std::unique_ptr<Backbone> zeros_like() const override {
    return std::make_unique<AttnNiserBackbone>(AttentionParams::zeros(width()));
  }
  void append_tensors(const std::string& prefix, std::vector<TensorRef>& out) override {
    params_.append_tensors(prefix, out);
  }

  Vector encode(Prefix prefix, const Matrix& items) const override;
  void backward(Prefix prefix, const Matrix& items, const Vector& grad_out, Backbone& grads,
                SparseRowGrads& item_grads) const override;

  AttentionParams& params() { return params_; }
  const AttentionParams& params() const { return params_; }

 private:
  AttentionParams params_;
};

using BackboneFactory = std::function<std::unique_ptr<Backbone>(std::size_t width, std::mt19937_64& rng)>;

void register_backbone(const std::string& key, BackboneFactory factory);
std::unique_ptr<Backbone> make_backbone(const std::string& key, std::size_t width, std::mt19937_64& rng);
std::vector<std::string> backbone_keys();

/// d(loss)/d(raw) for y = raw / |raw|, given d(loss)/dy.
Vector normalize_backward(const Vector& raw, const Vector& grad_normalized);

}  // namespace semsr
