#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "semsr/backbone.hpp"
#include "semsr/embeddings.hpp"
#include "semsr/ranked_list.hpp"

namespace semsr {

/// base: ID embeddings only. sem_i: same architecture, table seeded from
/// projected semantic vectors. sem_f: session and item views fused with the
/// frozen semantic table on every forward pass.
enum class Variant { base, sem_i, sem_f };

std::string_view to_string(Variant variant);
Variant parse_variant(std::string_view text);

struct ModelConfig {
  Variant variant = Variant::base;
  std::string backbone = AttnNiserBackbone::kKey;
  std::size_t n = 0;
  std::size_t d1 = 100;
  std::size_t d2 = 1024;  // only meaningful for sem_f
  std::size_t d = 100;    // fused width, sem_f only
  double scale = 16.0;    // logit multiplier for base/sem_i

  bool fused() const { return variant == Variant::sem_f; }
};

/// All trainable tensors. The semantic table is never part of a Model.
class Model {
 public:
  Model() = default;
  Model(const Model& other);
  Model& operator=(const Model& other);
  Model(Model&&) noexcept = default;
  Model& operator=(Model&&) noexcept = default;

  /// Draws backbone (then, for sem_f, semantic attention, W4, W5) from
  /// `seed`; the item table is supplied by the caller.
  static Model create(const ModelConfig& config, Matrix item_table, std::uint64_t seed);

  Model zeros_like() const;
  std::vector<TensorRef> tensors();
  void validate() const;
  /// Throws NumericError naming the first tensor holding a NaN or infinity.
  void require_finite_params() const;

  ModelConfig config;
  Matrix items;                      // I_m, n x d1
  std::unique_ptr<Backbone> backbone;
  AttentionParams semantic_attention;  // width d2, sem_f only
  Matrix fuse_session;               // W4, d x (d1 + d2), sem_f only
  Matrix fuse_items;                 // W5, d x (d1 + d2), sem_f only
};

/// Builds the initial item table for a variant: random for base (and for
/// sem_i when `init` says so), projected semantic rows for sem_i otherwise.
Matrix initial_item_table(const ModelConfig& config, const SemanticTable* semantic, std::optional<InitMode> init,
                          std::uint64_t seed);

/// Frozen-parameter scorer. Item-side matrices are computed once.
class Scorer {
 public:
  Scorer(const Model& model, const SemanticTable* semantic);

  std::size_t items() const { return static_cast<std::size_t>(item_matrix_.rows()); }
  Vector logits(Prefix prefix) const;
  Vector probabilities(Prefix prefix) const;
  RankedList recommend(Prefix prefix, std::size_t k) const;

 private:
  const Model& model_;
  const SemanticTable* semantic_;
  Matrix item_matrix_;  // normalized I_m rows (base/sem_i) or fused rows (sem_f)
};

/// Probability vector over all n items for one prefix.
Vector score_all(Prefix prefix, const Model& model, const SemanticTable* semantic);

/// Fused item rows W5 [I_m; I_l] as an n x d matrix.
Matrix fused_item_rows(const Model& model, const Matrix& semantic);
Matrix normalized_item_rows(const Matrix& items);

}  // namespace semsr
