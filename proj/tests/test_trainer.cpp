#include <gtest/gtest.h>

#include <cmath>

#include "crossnet/trainer.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace crossnet;
using namespace testing_support;

namespace {

std::vector<oracle::Vec> weight_values(const ModelParams& p) {
  std::vector<oracle::Vec> out;
  for (const auto& np : p.named())
    if (np.is_weight) out.push_back(np.node->value.storage());
  return out;
}

NamedParam scalar_param(double x) { return {"x", leaf(Tensor::scalar(x), true, "x"), true}; }

}  // namespace

TEST(Loss, PerfectPredictionLeavesOnlyPenalty) {
  Rng rng(1);
  const auto p = init_params(toy_config(Architecture::CrossNet), rng);
  const auto probs = std::vector<Var>{constant(Tensor::vector({1, 0, 0})), constant(Tensor::vector({0, 0, 1}))};
  const double ce = loss(probs, {0, 2}, p, 0.0)->value.item();
  EXPECT_LE(std::abs(ce), 1e-10);
  const double total = loss(probs, {0, 2}, p, 0.01)->value.item();
  EXPECT_NEAR(total, 0.01 * p.weight_sq_norm(), 1e-12);
}

TEST(Loss, UniformPredictionIsLog3) {
  Rng rng(2);
  const auto p = init_params(toy_config(Architecture::BiCond), rng);
  for (std::size_t gold = 0; gold < 3; ++gold) {
    const auto l = loss({constant(Tensor::vector({1.0 / 3, 1.0 / 3, 1.0 / 3}))}, {gold}, p, 0.0);
    EXPECT_NEAR(l->value.item(), std::log(3.0), 1e-15);
  }
}

TEST(Loss, MatchesScalarOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const auto arch = static_cast<Architecture>(trial % 3);
    auto p = init_params(toy_config(arch), rng);
    randomize(p, rng);
    std::vector<Var> probs;
    std::vector<oracle::Vec> raw;
    std::vector<std::size_t> gold;
    for (int i = 0; i < 5; ++i) {
      const auto pr = softmax_values(random_tensor({3}, rng, 4.0));
      raw.push_back(pr.storage());
      probs.push_back(constant(pr));
      gold.push_back(rng.below(3));
    }
    const double lambda = rng.uniform(0.0, 0.1);
    EXPECT_NEAR(loss(probs, gold, p, lambda)->value.item(), oracle::loss(raw, gold, weight_values(p), lambda), 1e-12);
  }
}

TEST(Loss, BiasesAreNotPenalized) {
  Rng rng(4);
  auto p = init_params(toy_config(Architecture::CrossNet), rng);
  const auto probs = std::vector<Var>{constant(Tensor::vector({0.2, 0.3, 0.5}))};
  const double before = loss(probs, {1}, p, 0.5)->value.item();
  for (auto& v : p.head.b_out->value.storage()) v += 10.0;
  EXPECT_EQ(loss(probs, {1}, p, 0.5)->value.item(), before);
}

TEST(Loss, FloorAndErrors) {
  Rng rng(5);
  const auto p = init_params(toy_config(Architecture::CrossNet), rng);
  const double l = loss({constant(Tensor::vector({1, 0, 0}))}, {1}, p, 0.0)->value.item();
  EXPECT_NEAR(l, -std::log(1e-12), 1e-9);
  EXPECT_THROW(loss({constant(Tensor::vector({1, 0, 0}))}, {0, 1}, p, 0.0), std::invalid_argument);
}

TEST(Loss, NonNegativeOnRandomBatches) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    auto p = init_params(toy_config(Architecture::CrossNet), rng);
    std::vector<Var> probs;
    std::vector<std::size_t> gold;
    const std::size_t n = 1 + rng.below(8);
    for (std::size_t i = 0; i < n; ++i) {
      probs.push_back(constant(softmax_values(random_tensor({3}, rng, 10.0))));
      gold.push_back(rng.below(3));
    }
    EXPECT_GE(loss(probs, gold, p, rng.uniform(0.0, 1.0))->value.item(), 0.0);
  }
}

TEST(Adam, ZeroGradientChangesNothing) {
  Rng rng(7);
  const auto p = init_params(toy_config(Architecture::CrossNet), rng);
  const auto before = p.clone();
  auto state = AdamState::for_params(p.trainable());
  zero_grad(p.trainable());
  adam_step(p, state, TrainConfig{});
  EXPECT_TRUE(p.values_equal(before));
  EXPECT_EQ(state.t, 1u);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  TrainConfig cfg;
  for (double g : {3.0, -0.25, 1e-3}) {
    const auto x = scalar_param(0.5);
    x.node->grad[0] = g;
    AdamState s = AdamState::for_params({x.node});
    adam_step(std::vector<NamedParam>{x}, s, cfg);
    // m_hat = g and v_hat = g^2 after one step, so the update is lr * g / (|g| + eps).
    const double want = 0.5 - cfg.learning_rate * g / (std::abs(g) + cfg.epsilon);
    EXPECT_NEAR(x.node->value[0], want, 1e-15);
    EXPECT_NEAR(x.node->value[0], 0.5 - cfg.learning_rate * (g > 0 ? 1 : -1), 1e-7);
  }
}

TEST(Adam, QuadraticDescentMatchesScriptedRun) {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  const auto x = scalar_param(1.0);
  AdamState s = AdamState::for_params({x.node});
  // Scalar recursion written out independently.
  double ox = 1.0, m = 0.0, v = 0.0;
  double prev = 1.0;
  bool reached = false;
  for (int t = 1; t <= 100; ++t) {
    zero_grad({x.node});
    backward(mul(x.node, x.node));
    adam_step(std::vector<NamedParam>{x}, s, cfg);
    const double g = 2.0 * ox;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    ox -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    EXPECT_NEAR(x.node->value[0], ox, 1e-12);
    const double cur = std::abs(x.node->value[0]);
    if (!reached) {
      EXPECT_LT(cur, prev) << "step " << t;
      reached = cur < 0.1;
    }
    prev = cur;
  }
  EXPECT_TRUE(reached);
  EXPECT_LT(std::abs(x.node->value[0]), 0.1);
}

TEST(Adam, NanGradientNamesParameter) {
  Rng rng(8);
  const auto p = init_params(toy_config(Architecture::CrossNet), rng);
  auto state = AdamState::for_params(p.trainable());
  zero_grad(p.trainable());
  p.attention.w2->grad[1] = std::nan("");
  const auto before = p.clone();
  try {
    adam_step(p, state, TrainConfig{});
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("attention.w2"), std::string::npos) << e.what();
  }
  EXPECT_TRUE(p.values_equal(before));
  EXPECT_EQ(state.t, 0u);
}

TEST(Clip, GlobalNormRescales) {
  auto a = leaf(Tensor::vector({0, 0}));
  auto b = leaf(Tensor::vector({0}));
  a->grad = Tensor::vector({3, 0});
  b->grad = Tensor::vector({4});
  EXPECT_DOUBLE_EQ(clip_grad_norm({a, b}, 1.0), 5.0);
  EXPECT_NEAR(a->grad[0], 0.6, 1e-15);
  EXPECT_NEAR(b->grad[0], 0.8, 1e-15);
  EXPECT_DOUBLE_EQ(clip_grad_norm({a, b}, 0.0), 1.0);
}

TEST(TrainConfigTest, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.patience = 60;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  c.learning_rate = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = {};
  EXPECT_EQ(to_json(train_config_from_json(to_json(c))), to_json(c));
}

class Overfit : public ::testing::TestWithParam<Architecture> {};

TEST_P(Overfit, MemorizesThirtyTwoInstances) {
  const auto d = toy_data(32, 10, 1);
  Rng rng(1);
  const auto r = train(overfit_model(GetParam()), overfit_train(), d.examples, d.examples, d.table, rng);
  EXPECT_EQ(evaluate(d.examples, d.table, r.params).accuracy(), 1.0);
  EXPECT_LE(r.history.val_f.size(), 50u);
}

INSTANTIATE_TEST_SUITE_P(AllArchitectures, Overfit,
                         ::testing::Values(Architecture::CrossNet, Architecture::BiCond, Architecture::BiLstmConcat),
                         [](const auto& info) { return std::string(arch_name(info.param)); });

TEST(Train, SameSeedIsBitIdentical) {
  const auto d = toy_data(30, 6, 2);
  auto mc = toy_config(Architecture::CrossNet, 6, 4, 3);
  mc.dropout = 0.2;
  TrainConfig tc;
  tc.batch_size = 8;
  tc.max_epochs = 6;
  tc.patience = 3;
  Rng a(11), b(11);
  const auto ra = train(mc, tc, d.examples, d.examples, d.table, a);
  const auto rb = train(mc, tc, d.examples, d.examples, d.table, b);
  EXPECT_EQ(ra.history, rb.history);
  EXPECT_TRUE(ra.params.values_equal(rb.params));
}

TEST(Train, RegularizationShrinksWeights) {
  const auto d = toy_data(30, 6, 3);
  const auto mc = toy_config(Architecture::CrossNet, 6, 4, 3);
  TrainConfig tc;
  tc.batch_size = 4;
  tc.learning_rate = 1e-2;
  tc.max_epochs = 20;
  tc.patience = 20;
  tc.lambda = 0.0;
  Rng a(5), b(5);
  const auto free = train(mc, tc, d.examples, d.examples, d.table, a);
  tc.lambda = 0.01;
  const auto reg = train(mc, tc, d.examples, d.examples, d.table, b);
  // train() hands back the best-validation snapshot of each run.
  EXPECT_LT(reg.params.weight_sq_norm(), free.params.weight_sq_norm());
}

TEST(Train, EmbeddingsStayFrozen) {
  const auto d = toy_data(24, 6, 4);
  const Tensor before = d.table->value;
  Rng rng(3);
  TrainConfig tc;
  tc.batch_size = 4;
  tc.max_epochs = 3;
  tc.patience = 3;
  train(toy_config(Architecture::CrossNet, 6), tc, d.examples, d.examples, d.table, rng);
  EXPECT_EQ(d.table->value, before);
  for (double g : d.table->grad.storage()) EXPECT_EQ(g, 0.0);
  EXPECT_THROW(train(toy_config(Architecture::CrossNet, 6), tc, d.examples, d.examples, leaf(before), rng),
               std::invalid_argument);
}

TEST(Train, PatienceBoundsEpochsAfterBest) {
  Rng gen(9);
  for (int trial = 0; trial < 6; ++trial) {
    const auto d = toy_data(21, 4, 100 + trial);
    TrainConfig tc;
    tc.batch_size = 7;
    tc.max_epochs = 15;
    tc.patience = 1 + gen.below(3);
    Rng rng(gen.next_u64());
    const auto r = train(toy_config(static_cast<Architecture>(trial % 3), 4, 3, 3), tc, d.examples, d.examples,
                         d.table, rng);
    const auto& h = r.history;
    ASSERT_FALSE(h.val_f.empty());
    EXPECT_LE(h.val_f.size() - 1 - h.best_epoch, tc.patience);
    // best epoch holds the maximum, earliest on ties
    for (std::size_t e = 0; e < h.val_f.size(); ++e) {
      EXPECT_LE(h.val_f[e], h.val_f[h.best_epoch]);
      if (e < h.best_epoch) {
        EXPECT_LT(h.val_f[e], h.val_f[h.best_epoch]);
      }
    }
    if (h.stopped_early) {
      EXPECT_EQ(h.val_f.size() - 1 - h.best_epoch, tc.patience);
    }
    EXPECT_EQ(train_history_from_json(to_json(h)), h);
  }
}

TEST(Train, NonFiniteInputAborts) {
  const auto d = toy_data(12, 4, 5);
  Tensor bad = d.table->value;
  bad.at(d.examples[0].sentence[0], 0) = std::nan("");
  Rng rng(1);
  TrainConfig tc;
  tc.max_epochs = 2;
  tc.patience = 1;
  try {
    train(toy_config(Architecture::BiLstmConcat, 4), tc, d.examples, d.examples, constant(bad), rng);
    FAIL();
  } catch (const NonFiniteError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos) << e.what();
  } catch (const std::domain_error&) {
    // softmax refuses NaN logits before the loss is formed; also an abort
  }
}
