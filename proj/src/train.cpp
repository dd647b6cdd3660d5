#include "semsr/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "semsr/metrics.hpp"

namespace semsr {

namespace {

constexpr std::size_t kChunk = 8;

double log_sum_exp(const Vector& logits) {
  const double top = logits.maxCoeff();
  return top + std::log((logits.array() - top).exp().sum());
}

struct ChunkGrads {
  std::unique_ptr<Backbone> backbone;
  AttentionParams semantic;
  Matrix fuse_session;
  SparseRowGrads rows;
  double loss = 0.0;
};

}  // namespace

LossReport loss_and_grad(std::span<const Example> batch, const Model& model, const SemanticTable* semantic,
                         Model& grads, std::size_t threads) {
  if (batch.empty()) throw DataError("loss_and_grad: empty batch");
  model.validate();
  const bool fused = model.config.fused();
  if (fused && !semantic) throw UsageError("sem-f training needs the semantic table");
  const auto n = static_cast<Eigen::Index>(model.config.n);
  const auto d1 = static_cast<Eigen::Index>(model.config.d1);
  const auto d2 = static_cast<Eigen::Index>(model.config.d2);
  for (const auto& ex : batch) {
    if (ex.prefix.empty()) throw DataError("example with an empty prefix");
    if (ex.target >= model.config.n) throw DataError("target " + std::to_string(ex.target) + " out of range");
  }

  // Item-side matrices are rebuilt from the current parameters every batch.
  const Matrix item_matrix = fused ? fused_item_rows(model, semantic->values()) : normalized_item_rows(model.items);
  require_finite(fused ? "fused_items" : "normalized_items", item_matrix);
  const double scale = fused ? 1.0 : model.config.scale;
  const auto batch_size = static_cast<Eigen::Index>(batch.size());
  const double inv_batch = 1.0 / static_cast<double>(batch.size());

  Matrix logit_grads(batch_size, n);
  Matrix sessions(batch_size, item_matrix.cols());

  const std::size_t chunks = (batch.size() + kChunk - 1) / kChunk;
  std::vector<ChunkGrads> partial(chunks);
  parallel_chunks(batch.size(), kChunk, threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    auto& acc = partial[chunk];
    acc.backbone = model.backbone->zeros_like();
    if (fused) {
      acc.semantic = AttentionParams::zeros(model.config.d2);
      acc.fuse_session = Matrix::Zero(model.fuse_session.rows(), model.fuse_session.cols());
    }
    for (std::size_t e = begin; e < end; ++e) {
      const auto& ex = batch[e];
      const auto row = static_cast<Eigen::Index>(e);
      const Vector session_m = model.backbone->encode(ex.prefix, model.items);
      Vector session;
      Vector cat;
      AttentionTrace semantic_trace;
      if (fused) {
        const Vector session_l =
            encode_semantic_session(ex.prefix, semantic->values(), model.semantic_attention, &semantic_trace).session;
        cat.resize(d1 + d2);
        cat << session_m, session_l;
        session = model.fuse_session * cat;
      } else {
        session = session_m;
      }
      const Vector logits = scale * (item_matrix * session);
      require_finite("logits", logits);
      const double lse = log_sum_exp(logits);
      acc.loss += lse - logits[ex.target];

      Vector g = (logits.array() - lse).exp().matrix() * inv_batch;
      g[ex.target] -= inv_batch;
      logit_grads.row(row) = g.transpose();
      sessions.row(row) = session.transpose();

      const Vector grad_session = scale * (item_matrix.transpose() * g);
      Vector grad_session_m;
      if (fused) {
        acc.fuse_session.noalias() += grad_session * cat.transpose();
        const Vector grad_cat = model.fuse_session.transpose() * grad_session;
        grad_session_m = grad_cat.head(d1);
        Matrix unused_rows;  // the semantic table is frozen
        attend_backward(model.semantic_attention, semantic_trace, grad_cat.tail(d2), acc.semantic, unused_rows);
      } else {
        grad_session_m = grad_session;
      }
      model.backbone->backward(ex.prefix, model.items, grad_session_m, *acc.backbone, acc.rows);
    }
  });

  grads = model.zeros_like();
  double loss = 0.0;
  std::vector<TensorRef> grad_backbone;
  grads.backbone->append_tensors("", grad_backbone);
  std::vector<TensorRef> grad_semantic;
  if (fused) grads.semantic_attention.append_tensors("", grad_semantic);
  for (auto& acc : partial) {
    loss += acc.loss;
    std::vector<TensorRef> part;
    acc.backbone->append_tensors("", part);
    for (std::size_t t = 0; t < part.size(); ++t) {
      for (std::size_t i = 0; i < part[t].values.size(); ++i) grad_backbone[t].values[i] += part[t].values[i];
    }
    if (fused) {
      std::vector<TensorRef> sem;
      acc.semantic.append_tensors("", sem);
      for (std::size_t t = 0; t < sem.size(); ++t) {
        for (std::size_t i = 0; i < sem[t].values.size(); ++i) grad_semantic[t].values[i] += sem[t].values[i];
      }
      grads.fuse_session += acc.fuse_session;
    }
    for (auto& [item, g] : acc.rows.rows) grads.items.row(item) += g.transpose();
  }

  // Item-side gradient through every catalog row.
  const Matrix grad_item_matrix = scale * (logit_grads.transpose() * sessions);  // n x width
  if (fused) {
    grads.fuse_items.leftCols(d1).noalias() += grad_item_matrix.transpose() * model.items;
    grads.fuse_items.rightCols(d2).noalias() += grad_item_matrix.transpose() * semantic->values();
    grads.items.noalias() += grad_item_matrix * model.fuse_items.leftCols(d1);
  } else {
    for (Eigen::Index k = 0; k < n; ++k) {
      grads.items.row(k) += normalize_backward(model.items.row(k).transpose(), grad_item_matrix.row(k).transpose())
                                .transpose();
    }
  }

  LossReport report;
  report.batch_size = batch.size();
  report.mean_loss = loss * inv_batch;
  if (!std::isfinite(report.mean_loss)) throw NumericError("non-finite loss");
  double sq = 0.0;
  for (auto& t : grads.tensors()) {
    for (double v : t.values) sq += v * v;
  }
  report.grad_norm = std::sqrt(sq);
  if (!std::isfinite(report.grad_norm)) throw NumericError("non-finite gradient");
  return report;
}

double mean_loss(std::span<const Example> batch, const Model& model, const SemanticTable* semantic) {
  if (batch.empty()) throw DataError("mean_loss: empty batch");
  const Scorer scorer(model, semantic);
  double total = 0.0;
  for (const auto& ex : batch) {
    const Vector logits = scorer.logits(ex.prefix);
    total += log_sum_exp(logits) - logits[ex.target];
  }
  return total / static_cast<double>(batch.size());
}

void adam_step(std::span<const TensorRef> params, std::span<const TensorRef> grads, OptimizerState& state) {
  if (params.size() != grads.size()) throw UsageError("adam_step: parameter and gradient lists differ in length");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (params[t].dims != grads[t].dims) throw UsageError("adam_step: shape mismatch for '" + params[t].name + "'");
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.values.size(), 0.0);
      state.second_moment.emplace_back(p.values.size(), 0.0);
    }
  }
  if (state.first_moment.size() != params.size()) throw UsageError("adam_step: optimizer state has a different layout");
  for (std::size_t t = 0; t < params.size(); ++t) {
    if (state.first_moment[t].size() != params[t].values.size()) {
      throw UsageError("adam_step: moment shape mismatch for '" + params[t].name + "'");
    }
  }

  const auto& o = state.options;
  ++state.step;
  const double step = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, step);
  const double correction2 = 1.0 - std::pow(o.beta2, step);
  for (std::size_t t = 0; t < params.size(); ++t) {
    auto& m = state.first_moment[t];
    auto& v = state.second_moment[t];
    const auto& g = grads[t].values;
    auto& p = params[t].values;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
      v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.epsilon);
    }
  }
}

double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

GradCheckReport check_gradients(std::span<const Example> batch, const Model& model, const SemanticTable* semantic,
                                double step) {
  Model grads;
  loss_and_grad(batch, model, semantic, grads);
  auto analytic = grads.tensors();
  Model probe = model;
  auto params = probe.tensors();

  GradCheckReport report;
  report.worst.rel_error = -1.0;
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t i = 0; i < params[t].values.size(); ++i) {
      double& x = params[t].values[i];
      const double saved = x;
      x = saved + step;
      const double up = mean_loss(batch, probe, semantic);
      x = saved - step;
      const double down = mean_loss(batch, probe, semantic);
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[t].values[i];
      const double err = relative_error(a, numeric);
      ++report.checked;
      if (err > report.worst.rel_error) report.worst = {params[t].name, i, a, numeric, err};
    }
  }
  return report;
}

FitResult fit(std::span<const Example> train, std::span<const Example> val, Model model,
              const SemanticTable* semantic, const FitOptions& options, const EpochCallback& on_epoch) {
  if (train.empty()) throw DataError("fit: empty training set");
  if (options.batch_size == 0) throw UsageError("batch_size must be at least 1");
  model.validate();

  FitResult result;
  result.best = model;
  OptimizerState state;
  state.options = options.adam;
  std::mt19937_64 rng(derive_seed(options.seed, "shuffle"));
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t eval_k = std::min<std::size_t>(options.eval_k, model.config.n);
  double best_recall = -1.0;
  std::size_t stale = 0;
  std::vector<Example> batch;
  Model grads;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    seeded_shuffle(order, rng);
    double loss_sum = 0.0;
    try {
      for (std::size_t begin = 0; begin < order.size(); begin += options.batch_size) {
        const auto end = std::min(order.size(), begin + options.batch_size);
        batch.clear();
        for (std::size_t i = begin; i < end; ++i) batch.push_back(train[order[i]]);
        const auto report = loss_and_grad(batch, model, semantic, grads, options.threads);
        loss_sum += report.mean_loss * static_cast<double>(batch.size());
        auto params = model.tensors();
        auto g = grads.tensors();
        adam_step(params, g, state);
        result.steps = state.step;
      }
      model.require_finite_params();
    } catch (const NumericError& e) {
      result.diverged = true;
      result.divergence_message = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(train.size());
    if (!val.empty()) {
      const Scorer scorer(model, semantic);
      record.val_recall = evaluate(scorer, val, {eval_k}, options.threads).per_k.at(eval_k).recall;
    }
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);

    if (!record.val_recall) {
      result.best = model;
      result.best_epoch = epoch;
      continue;
    }
    if (*record.val_recall > best_recall) {
      best_recall = *record.val_recall;
      result.best = model;
      result.best_epoch = epoch;
      stale = 0;
    } else if (++stale >= options.patience && options.patience > 0) {
      break;
    }
  }
  return result;
}

}  // namespace semsr
