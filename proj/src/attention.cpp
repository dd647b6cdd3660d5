#include "semsr/attention.hpp"

#include <cmath>

namespace semsr {

AttentionParams AttentionParams::zeros(std::size_t width) {
  const auto w = static_cast<Eigen::Index>(width);
  return {Vector::Zero(w), Vector::Zero(w), Matrix::Zero(w, w), Matrix::Zero(w, w), Matrix::Zero(w, 2 * w)};
}

AttentionParams AttentionParams::random(std::size_t width, std::mt19937_64& rng, double scale) {
  auto p = zeros(width);
  auto fill = [&](double* data, Eigen::Index size) {
    for (Eigen::Index i = 0; i < size; ++i) data[i] = scale * (2.0 * unit_uniform(rng) - 1.0);
  };
  fill(p.q.data(), p.q.size());
  fill(p.c.data(), p.c.size());
  fill(p.w_last.data(), p.w_last.size());
  fill(p.w_item.data(), p.w_item.size());
  fill(p.w_out.data(), p.w_out.size());
  return p;
}

void AttentionParams::append_tensors(const std::string& prefix, std::vector<TensorRef>& out) {
  out.push_back(tensor_ref(prefix + "q", q));
  out.push_back(tensor_ref(prefix + "c", c));
  out.push_back(tensor_ref(prefix + "W1", w_last));
  out.push_back(tensor_ref(prefix + "W2", w_item));
  out.push_back(tensor_ref(prefix + "W3", w_out));
}

void AttentionParams::validate(std::string_view name) const {
  const auto w = q.size();
  if (c.size() != w || w_last.rows() != w || w_last.cols() != w || w_item.rows() != w || w_item.cols() != w ||
      w_out.rows() != w || w_out.cols() != 2 * w) {
    throw UsageError("attention parameters '" + std::string(name) + "' have inconsistent shapes");
  }
}

Vector softmax(const Vector& logits) {
  Vector out = (logits.array() - logits.maxCoeff()).exp();
  out /= out.sum();
  return out;
}

Matrix gather_rows(const Matrix& table, Prefix prefix) {
  Matrix rows(static_cast<Eigen::Index>(prefix.size()), table.cols());
  for (std::size_t j = 0; j < prefix.size(); ++j) {
    if (prefix[j] >= table.rows()) throw DataError("item index " + std::to_string(prefix[j]) + " out of range");
    rows.row(static_cast<Eigen::Index>(j)) = table.row(prefix[j]);
  }
  return rows;
}

Vector attend(const AttentionParams& params, const Matrix& rows, AttentionTrace* trace) {
  const auto length = rows.rows();
  const auto w = rows.cols();
  if (length == 0) throw DataError("cannot encode an empty prefix");
  if (w != params.q.size()) throw UsageError("attention width does not match the input rows");

  const Vector last = rows.row(length - 1).transpose();
  const auto attended = length - 1;
  Matrix gates(attended, w);
  Vector alphas(attended);
  Vector pooled = Vector::Zero(w);
  if (attended > 0) {
    const Vector query = params.w_last * last + params.c;
    Vector scores(attended);
    for (Eigen::Index j = 0; j < attended; ++j) {
      const Vector z = query + params.w_item * rows.row(j).transpose();
      gates.row(j) = z.unaryExpr([](double x) { return sigmoid(x); }).transpose();
      scores[j] = params.q.dot(gates.row(j).transpose());
    }
    alphas = softmax(scores);
    pooled = rows.topRows(attended).transpose() * alphas;
  }
  Vector cat(2 * w);
  cat << pooled, last;
  Vector out = params.w_out * cat;
  if (trace) {
    trace->rows = rows;
    trace->gates = std::move(gates);
    trace->alphas = alphas;
    trace->pooled = pooled;
    trace->out = out;
  }
  return out;
}

void attend_backward(const AttentionParams& params, const AttentionTrace& trace, const Vector& grad_out,
                     AttentionParams& grads, Matrix& grad_rows) {
  const auto& rows = trace.rows;
  const auto length = rows.rows();
  const auto w = rows.cols();
  const auto attended = length - 1;
  const Vector last = rows.row(length - 1).transpose();

  Vector cat(2 * w);
  cat << trace.pooled, last;
  grads.w_out.noalias() += grad_out * cat.transpose();
  const Vector grad_cat = params.w_out.transpose() * grad_out;
  const Vector grad_pooled = grad_cat.head(w);

  grad_rows = Matrix::Zero(length, w);
  grad_rows.row(length - 1) = grad_cat.tail(w).transpose();
  if (attended == 0) return;

  // pooled = sum_j alpha_j x_j
  const Vector grad_alpha = rows.topRows(attended) * grad_pooled;
  grad_rows.topRows(attended).noalias() += trace.alphas * grad_pooled.transpose();
  // softmax
  const double mean = trace.alphas.dot(grad_alpha);
  const Vector grad_score = trace.alphas.cwiseProduct((grad_alpha.array() - mean).matrix());

  Vector grad_query = Vector::Zero(w);
  for (Eigen::Index j = 0; j < attended; ++j) {
    const Vector gate = trace.gates.row(j).transpose();
    grads.q.noalias() += grad_score[j] * gate;
    const Vector grad_z = (grad_score[j] * params.q).cwiseProduct(gate.cwiseProduct((1.0 - gate.array()).matrix()));
    grad_query += grad_z;
    grads.w_item.noalias() += grad_z * rows.row(j);
    grad_rows.row(j) += (params.w_item.transpose() * grad_z).transpose();
  }
  grads.c += grad_query;
  grads.w_last.noalias() += grad_query * last.transpose();
  grad_rows.row(length - 1) += (params.w_last.transpose() * grad_query).transpose();
}

SemanticSessionEncoding encode_semantic_session(Prefix prefix, const Matrix& semantic, const AttentionParams& params,
                                                AttentionTrace* trace) {
  AttentionTrace local;
  AttentionTrace* t = trace ? trace : &local;
  Vector session = attend(params, gather_rows(semantic, prefix), t);
  return {std::move(session), t->alphas};
}

}  // namespace semsr
