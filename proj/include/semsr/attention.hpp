#pragma once

#include <vector>

#include "semsr/common.hpp"

namespace semsr {

/// Soft-attention session pooling at width w:
///   a_j = q . sigmoid(W1 x_last + W2 x_j + c)   for every position j before the last
///   alpha = softmax(a),  pooled = sum_j alpha_j x_j,  out = W3 [pooled; x_last]
struct AttentionParams {
  Vector q;
  Vector c;
  Matrix w_last;   // W1, w x w
  Matrix w_item;   // W2, w x w
  Matrix w_out;    // W3, w x 2w

  static AttentionParams zeros(std::size_t width);
  /// Entries uniform in [-scale, scale].
  static AttentionParams random(std::size_t width, std::mt19937_64& rng, double scale);

  std::size_t width() const { return static_cast<std::size_t>(q.size()); }
  void append_tensors(const std::string& prefix, std::vector<TensorRef>& out);
  void validate(std::string_view name) const;
};

struct AttentionTrace {
  Matrix rows;      // L x w inputs
  Matrix gates;     // (L-1) x w sigmoid outputs
  Vector alphas;    // L-1 softmax weights
  Vector pooled;    // w
  Vector out;       // w
};

Vector attend(const AttentionParams& params, const Matrix& rows, AttentionTrace* trace = nullptr);

/// Accumulates d(loss)/d(params) into `grads` and writes d(loss)/d(rows) to
/// `grad_rows` (resized to L x w).
void attend_backward(const AttentionParams& params, const AttentionTrace& trace, const Vector& grad_out,
                     AttentionParams& grads, Matrix& grad_rows);

struct SemanticSessionEncoding {
  Vector session;  // s_l
  Vector alphas;
};

/// Gathers the prefix rows from the frozen table and pools them.
SemanticSessionEncoding encode_semantic_session(Prefix prefix, const Matrix& semantic, const AttentionParams& params,
                                                AttentionTrace* trace = nullptr);

Matrix gather_rows(const Matrix& table, Prefix prefix);

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

/// Max-subtracted softmax.
Vector softmax(const Vector& logits);

}  // namespace semsr
