#include <gtest/gtest.h>

#include <cmath>

#include "semsr/train.hpp"
#include "support/fixtures.hpp"

namespace semsr {
namespace {

ModelConfig tiny(Variant variant) {
  ModelConfig c;
  c.variant = variant;
  c.n = 7;
  c.d1 = 3;
  c.d2 = 4;
  c.d = 3;
  return c;
}

TEST(Loss, ForcedTargetGivesZeroLoss) {
  ModelConfig c = tiny(Variant::base);
  c.scale = 1e4;
  Matrix items = Matrix::Identity(7, 3);
  items.bottomRows(4).setConstant(-1.0);
  Model model = Model::create(c, items, 1);
  auto& p = dynamic_cast<AttnNiserBackbone&>(*model.backbone).params();
  p.w_out.setZero();
  p.w_out.rightCols(3).setIdentity();  // s_m = normalized last item
  const std::vector<Example> batch{{{0}, 0}};
  Model grads;
  const auto report = loss_and_grad(batch, model, nullptr, grads);
  EXPECT_LT(report.mean_loss, 1e-12);
  EXPECT_GE(report.mean_loss, 0.0);
}

TEST(Loss, UniformScoresGiveLogN) {
  for (auto variant : {Variant::base, Variant::sem_f}) {
    const ModelConfig c = tiny(variant);
    const Model model = Model::create(c, Matrix::Constant(7, 3, 0.4), 2);
    const SemanticTable sem(Matrix::Constant(7, 4, -0.2));
    const std::vector<Example> batch{{{0, 3}, 5}, {{6}, 1}};
    Model grads;
    const auto report = loss_and_grad(batch, model, &sem, grads);
    EXPECT_NEAR(report.mean_loss, std::log(7.0), 1e-12);
    EXPECT_EQ(report.batch_size, 2u);
  }
}

TEST(Loss, AgreesWithInferencePath) {
  std::mt19937_64 rng(3);
  for (auto variant : {Variant::base, Variant::sem_f}) {
    const auto c = tiny(variant);
    const auto model = testing::random_model(c, 4);
    const auto sem = testing::random_semantic(7, 4, 5);
    const auto batch = testing::random_examples(6, 7, 5, rng);
    Model grads;
    EXPECT_NEAR(loss_and_grad(batch, model, &sem, grads).mean_loss, mean_loss(batch, model, &sem), 1e-12);
  }
}

TEST(Loss, RejectsBadBatches) {
  const auto model = testing::random_model(tiny(Variant::base), 4);
  Model grads;
  EXPECT_THROW(loss_and_grad({}, model, nullptr, grads), DataError);
  const std::vector<Example> out_of_range{{{0}, 9}};
  EXPECT_THROW(loss_and_grad(out_of_range, model, nullptr, grads), DataError);
}

TEST(Gradients, TinyConfigMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  for (auto variant : {Variant::base, Variant::sem_f}) {
    const auto c = tiny(variant);
    const auto model = testing::random_model(c, 7);
    const auto sem = testing::random_semantic(7, 4, 8);
    const std::vector<Example> batch{{{2}, 4}, {{1, 5, 3}, 0}};
    const auto report = check_gradients(batch, model, &sem);
    EXPECT_LT(report.worst.rel_error, 1e-4)
        << to_string(variant) << " " << report.worst.tensor << "[" << report.worst.index
        << "] analytic=" << report.worst.analytic << " numeric=" << report.worst.numeric;
    EXPECT_GT(report.checked, 0u);
  }
}

TEST(Gradients, RandomConfigsMatchFiniteDifferences) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 12; ++trial) {
    ModelConfig c;
    c.variant = trial % 2 ? Variant::sem_f : Variant::base;
    c.n = testing::draw(rng, 7, 20);
    c.d1 = testing::draw(rng, 3, 6);
    c.d2 = testing::draw(rng, 4, 8);
    c.d = testing::draw(rng, 3, 6);
    const auto model = testing::random_model(c, 100 + trial);
    const auto sem = testing::random_semantic(c.n, c.d2, 200 + trial);
    auto batch = testing::random_examples(testing::draw(rng, 1, 4), c.n, 5, rng);
    batch[0].prefix.resize(1);
    const auto report = check_gradients(batch, model, &sem);
    EXPECT_LT(report.worst.rel_error, 1e-4) << "trial " << trial << " " << report.worst.tensor;
  }
}

TEST(Gradients, SemanticTableIsNotATrainableTensor) {
  auto model = testing::random_model(tiny(Variant::sem_f), 1);
  std::vector<std::string> names;
  for (const auto& t : model.tensors()) names.push_back(t.name);
  const std::vector<std::string> expected{"item_embedding", "backbone.q",  "backbone.c",  "backbone.W1",
                                          "backbone.W2",    "backbone.W3", "semantic.q",  "semantic.c",
                                          "semantic.W1",    "semantic.W2", "semantic.W3", "W4",
                                          "W5"};
  EXPECT_EQ(names, expected);
}

TEST(Gradients, IndependentOfThreadCount) {
  std::mt19937_64 rng(10);
  ModelConfig c = tiny(Variant::sem_f);
  c.n = 30;
  const auto model = testing::random_model(c, 11);
  const auto sem = testing::random_semantic(30, 4, 12);
  const auto batch = testing::random_examples(37, 30, 6, rng);
  Model g1, g4;
  const auto r1 = loss_and_grad(batch, model, &sem, g1, 1);
  const auto r4 = loss_and_grad(batch, model, &sem, g4, 4);
  EXPECT_EQ(r1.mean_loss, r4.mean_loss);
  auto t1 = g1.tensors();
  auto t4 = g4.tensors();
  for (std::size_t t = 0; t < t1.size(); ++t)
    EXPECT_EQ(0, std::memcmp(t1[t].values.data(), t4[t].values.data(), t1[t].values.size_bytes())) << t1[t].name;
}

TEST(Adam, FirstStepMovesEachEntryByLr) {
  Vector p = Vector::Constant(5, 1.0);
  Vector g(5);
  g << 0.3, -2.0, 1e-3, 7.0, -0.01;
  std::vector<TensorRef> params{tensor_ref("p", p)};
  std::vector<TensorRef> grads{tensor_ref("p", g)};
  OptimizerState state;
  adam_step(params, grads, state);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(std::abs(p[i] - 1.0), 0.001, 1e-6);
  EXPECT_LT(p[0], 1.0);
  EXPECT_GT(p[1], 1.0);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, ZeroGradientLeavesParametersAlone) {
  Matrix p = Matrix::Constant(2, 3, 0.5);
  Matrix g = Matrix::Zero(2, 3);
  std::vector<TensorRef> params{tensor_ref("p", p)};
  std::vector<TensorRef> grads{tensor_ref("p", g)};
  OptimizerState state;
  adam_step(params, grads, state);
  adam_step(params, grads, state);
  EXPECT_EQ(p, Matrix::Constant(2, 3, 0.5));
  EXPECT_EQ(state.step, 2u);
}

TEST(Adam, ThreeStepsMatchScalarReference) {
  const double g_steps[3][2] = {{0.5, -1.5}, {0.2, 0.1}, {-0.7, 2.0}};
  Vector p(2);
  p << 0.25, -0.75;
  Vector g(2);
  std::vector<TensorRef> params{tensor_ref("p", p)};
  std::vector<TensorRef> grads{tensor_ref("g", g)};
  OptimizerState state;
  state.options.lr = 0.01;

  // Scalar reference, written out per entry.
  double ref[2] = {0.25, -0.75};
  double m[2] = {0, 0}, v[2] = {0, 0};
  for (int t = 1; t <= 3; ++t) {
    g << g_steps[t - 1][0], g_steps[t - 1][1];
    adam_step(params, grads, state);
    for (int i = 0; i < 2; ++i) {
      const double gi = g_steps[t - 1][i];
      m[i] = 0.9 * m[i] + 0.1 * gi;
      v[i] = 0.999 * v[i] + 0.001 * gi * gi;
      const double mh = m[i] / (1 - std::pow(0.9, t));
      const double vh = v[i] / (1 - std::pow(0.999, t));
      ref[i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
    }
    EXPECT_NEAR(p[0], ref[0], 1e-15);
    EXPECT_NEAR(p[1], ref[1], 1e-15);
  }
}

TEST(Adam, ShapeMismatchIsAnError) {
  Matrix p = Matrix::Zero(2, 3);
  Matrix g = Matrix::Zero(3, 2);
  std::vector<TensorRef> params{tensor_ref("p", p)};
  std::vector<TensorRef> grads{tensor_ref("p", g)};
  OptimizerState state;
  EXPECT_THROW(adam_step(params, grads, state), UsageError);
  std::vector<TensorRef> none;
  EXPECT_THROW(adam_step(params, none, state), UsageError);
}

TEST(Adam, DefaultsMatchPublishedSetup) {
  const AdamOptions adam;
  EXPECT_DOUBLE_EQ(adam.lr, 0.001);
  EXPECT_DOUBLE_EQ(adam.beta1, 0.9);
  const FitOptions fit_options;
  EXPECT_EQ(fit_options.batch_size, 100u);
  EXPECT_EQ(fit_options.eval_k, 100u);
  EXPECT_DOUBLE_EQ(ModelConfig{}.scale, 16.0);
}

TEST(Fit, MemorizesASingleExample) {
  for (auto variant : {Variant::base, Variant::sem_f}) {
    ModelConfig c = tiny(variant);
    c.n = 20;
    const auto sem = testing::random_semantic(20, 4, 1);
    Model model = Model::create(c, initial_item_table(c, &sem, std::nullopt, 3), 3);
    const std::vector<Example> train{{{4, 9}, 13}};
    FitOptions options;
    options.epochs = 200;
    options.adam.lr = 0.01;
    const auto result = fit(train, {}, std::move(model), &sem, options);
    EXPECT_LT(result.history.back().train_loss, 0.01) << to_string(variant);
    EXPECT_EQ(result.history.size(), 200u);
  }
}

TEST(Fit, MemorizesTenDistinctTargets) {
  ModelConfig c;
  c.n = 30;
  c.d1 = 16;
  std::mt19937_64 rng(4);
  std::vector<Example> train;
  for (ItemIndex t = 0; t < 10; ++t) {
    auto ex = testing::random_examples(1, c.n, 4, rng)[0];
    ex.target = t * 3;
    train.push_back(ex);
  }
  Model model = Model::create(c, initial_item_table(c, nullptr, std::nullopt, 5), 5);
  FitOptions options;
  options.epochs = 500;
  options.batch_size = 10;
  options.adam.lr = 0.01;
  const auto result = fit(train, {}, std::move(model), nullptr, options);
  EXPECT_LT(result.history.back().train_loss, std::log(30.0) / 10.0);
}

TEST(Fit, DeterministicAndKeepsSemanticFrozen) {
  ModelConfig c = tiny(Variant::sem_f);
  c.n = 25;
  const auto sem = testing::random_semantic(25, 4, 6);
  const auto before = sem.fingerprint();
  std::mt19937_64 rng(7);
  const auto train = testing::random_examples(60, 25, 5, rng);
  const auto val = testing::random_examples(15, 25, 5, rng);
  FitOptions options;
  options.epochs = 6;
  options.batch_size = 16;
  options.eval_k = 5;
  options.seed = 99;
  auto run = [&] {
    Model model = Model::create(c, initial_item_table(c, &sem, std::nullopt, 99), 99);
    return fit(train, val, std::move(model), &sem, options);
  };
  auto a = run();
  auto b = run();
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    EXPECT_EQ(a.history[e].train_loss, b.history[e].train_loss);
    EXPECT_EQ(a.history[e].val_recall, b.history[e].val_recall);
  }
  auto ta = a.best.tensors();
  auto tb = b.best.tensors();
  for (std::size_t t = 0; t < ta.size(); ++t)
    EXPECT_EQ(0, std::memcmp(ta[t].values.data(), tb[t].values.data(), ta[t].values.size_bytes()));
  EXPECT_EQ(sem.fingerprint(), before);
}

TEST(Fit, EarlyStopsOnStaleValidation) {
  ModelConfig c = tiny(Variant::base);
  std::mt19937_64 rng(8);
  const auto train = testing::random_examples(20, 7, 4, rng);
  const auto val = testing::random_examples(5, 7, 4, rng);
  FitOptions options;
  options.epochs = 50;
  options.patience = 2;
  options.eval_k = 7;  // every target is always within the top 7, so recall never improves
  const auto result = fit(train, val, testing::random_model(c, 2), nullptr, options);
  EXPECT_EQ(result.history.size(), 3u);
  EXPECT_EQ(result.best_epoch, 1u);
}

TEST(Fit, DivergenceKeepsLastGoodModel) {
  ModelConfig c = tiny(Variant::sem_f);
  const auto sem = testing::random_semantic(7, 4, 6);
  std::mt19937_64 rng(9);
  const auto train = testing::random_examples(10, 7, 4, rng);
  FitOptions options;
  options.epochs = 5;
  options.batch_size = 5;
  options.adam.lr = 1e308;  // the first step overflows the second batch
  const auto initial = testing::random_model(c, 3);
  const auto result = fit(train, {}, initial, &sem, options);
  EXPECT_TRUE(result.diverged);
  EXPECT_FALSE(result.divergence_message.empty());
  EXPECT_NO_THROW(result.best.require_finite_params());
  EXPECT_EQ(result.history.size(), 0u);
  EXPECT_EQ(result.best.items, initial.items);
}

TEST(RelativeError, FloorGuardsNearZeroEntries) {
  EXPECT_DOUBLE_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_NEAR(relative_error(1.0, 1.001), 0.001 / 1.001, 1e-15);
  EXPECT_NEAR(relative_error(1e-9, 2e-9), 1e-9 / 1e-6, 1e-18);
}

}  // namespace
}  // namespace semsr
