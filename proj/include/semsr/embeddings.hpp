#pragma once

#include <string>
#include <vector>

#include "semsr/common.hpp"
#include "semsr/dataset.hpp"

namespace semsr {

/// Frozen item vectors from an external text encoder, rows in dense-index order.
class SemanticTable {
 public:
  SemanticTable() = default;
  explicit SemanticTable(Matrix values);

  const Matrix& values() const { return values_; }
  std::size_t rows() const { return static_cast<std::size_t>(values_.rows()); }
  std::size_t width() const { return static_cast<std::size_t>(values_.cols()); }
  auto row(ItemIndex i) const { return values_.row(i); }

  /// Content hash of the stored values; recomputed on every call.
  std::string fingerprint() const;

 private:
  Matrix values_;
};

/// Reads either the `SEMB1` binary export or the `id<TAB>f1,f2,...` text form.
SemanticTable load_semantic_table(const std::string& path, const Catalog& catalog);
void save_semantic_binary(const std::string& path, const SemanticTable& table);
void save_semantic_tsv(const std::string& path, const SemanticTable& table, const Catalog& catalog);

/// Deterministic stand-in for an LLM text encoder: each lower-cased
/// alphanumeric token contributes a hash-seeded Gaussian vector, and the sum
/// is scaled to unit length. Texts that share tokens land close together.
Vector encode_text(std::string_view text, std::size_t width);
Vector pseudo_encode(const ItemMeta& item, std::size_t width);
SemanticTable pseudo_encode_catalog(const Catalog& catalog, std::size_t width);

struct Projection {
  Matrix basis;  // d2 x d1, orthonormal columns
  Vector mean;   // d2
  std::vector<std::string> warnings;

  Matrix apply(const Matrix& rows) const;
};

/// Top principal directions of the centered table. Each column's
/// largest-magnitude entry is made positive; missing rank is filled with an
/// orthonormal completion.
Projection fit_projection(const SemanticTable& semantic, std::size_t d1);

enum class InitMode { random, semantic_projected };

/// Uniform [-0.1, 0.1] draws, row-major from a seeded engine.
Matrix init_random_table(std::size_t n, std::size_t d1, std::uint64_t seed);
/// Centered semantic rows through the projection, then unit-normalized.
Matrix init_projected_table(const SemanticTable& semantic, const Projection& projection);

}  // namespace semsr
