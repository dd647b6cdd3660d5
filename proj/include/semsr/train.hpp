#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "semsr/dataset.hpp"
#include "semsr/model.hpp"

namespace semsr {

struct LossReport {
  double mean_loss = 0.0;
  std::size_t batch_size = 0;
  double grad_norm = 0.0;
};

/// Mean cross-entropy of the batch and its exact gradient. `grads` is
/// overwritten with a zeros_like(model) holding d(mean loss)/d(tensor).
/// Per-example work runs in fixed chunks and is reduced in chunk order, so
/// results do not depend on `threads`.
LossReport loss_and_grad(std::span<const Example> batch, const Model& model, const SemanticTable* semantic,
                         Model& grads, std::size_t threads = 1);

/// Forward-only mean cross-entropy through the inference scorer.
double mean_loss(std::span<const Example> batch, const Model& model, const SemanticTable* semantic);

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamOptions options;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of `params` in place. Moments are created
/// on the first call and shape-checked on every call.
void adam_step(std::span<const TensorRef> params, std::span<const TensorRef> grads, OptimizerState& state);

struct GradCheckEntry {
  std::string tensor;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::size_t checked = 0;
  GradCheckEntry worst;
};

/// |a - f| / max(|a|, |f|, floor). The floor sits above the round-off noise
/// of a central difference at h = 1e-4 (about 1e-11 absolute for O(1)
/// losses), so entries near zero are compared absolutely.
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Central finite differences of mean_loss for every trainable entry.
GradCheckReport check_gradients(std::span<const Example> batch, const Model& model, const SemanticTable* semantic,
                                double step = 1e-4);

struct FitOptions {
  std::size_t epochs = 30;
  std::size_t batch_size = 100;
  std::size_t patience = 5;
  std::size_t eval_k = 100;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  AdamOptions adam;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  std::optional<double> val_recall;
};

struct FitResult {
  Model best;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  std::uint64_t steps = 0;
  bool diverged = false;
  std::string divergence_message;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Seeded-shuffle minibatch training with per-epoch validation Recall@eval_k,
/// best-model retention and early stopping. On a non-finite loss, training
/// stops and the best completed state is returned with `diverged` set.
FitResult fit(std::span<const Example> train, std::span<const Example> val, Model model,
              const SemanticTable* semantic, const FitOptions& options, const EpochCallback& on_epoch = {});

}  // namespace semsr
