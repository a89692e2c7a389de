#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "dcq/optimizer.hpp"
#include "dcq/trainer.hpp"
#include "test_util.hpp"

namespace dcq {
namespace {

using testing::tiny_config;

double sgd_scalar(double theta, double g, double lr, double momentum, double wd, int steps) {
  std::vector<Tensor> p{Tensor::Constant(1, 1, theta)};
  const std::vector<Tensor> grads{Tensor::Constant(1, 1, g)};
  auto state = OptimizerState::zeros_like(p);
  for (int i = 0; i < steps; ++i) sgd_momentum_step(p, grads, state, lr, momentum, wd);
  return p[0](0, 0);
}

TEST(Sgd, PlainStep) { EXPECT_DOUBLE_EQ(sgd_scalar(1.0, 0.5, 0.1, 0.0, 0.0, 1), 1.0 - 0.05); }

TEST(Sgd, MomentumRecursion) { EXPECT_DOUBLE_EQ(sgd_scalar(0.0, 1.0, 1.0, 0.9, 0.0, 2), -2.9); }

TEST(Sgd, WeightDecayOnly) { EXPECT_DOUBLE_EQ(sgd_scalar(1.0, 0.0, 1.0, 0.0, 0.1, 1), 0.9); }

TEST(Sgd, PerTensorDecay) {
  std::vector<Tensor> p{Tensor::Ones(1, 2), Tensor::Ones(1, 2)};
  const std::vector<Tensor> g{Tensor::Zero(1, 2), Tensor::Zero(1, 2)};
  auto state = OptimizerState::zeros_like(p);
  const std::vector<double> wd{0.1, 0.0};
  sgd_momentum_step(p, g, state, 1.0, 0.0, wd);
  EXPECT_EQ(p[0], Tensor::Constant(1, 2, 0.9));
  EXPECT_EQ(p[1], Tensor::Ones(1, 2));
  EXPECT_EQ(state.bytes(), 4u * sizeof(double));
}

TEST(Sgd, MismatchedListsAreShapeErrors) {
  std::vector<Tensor> p{Tensor::Ones(1, 2)};
  const std::vector<Tensor> g{Tensor::Zero(1, 3)};
  auto state = OptimizerState::zeros_like(p);
  EXPECT_THROW(sgd_momentum_step(p, g, state, 1.0, 0.0, 0.0), ShapeError);
}

TEST(Schedule, StepDecay) {
  TrainConfig c;
  c.lr0 = 0.1;
  c.decay_epochs = {8, 16, 18};
  EXPECT_DOUBLE_EQ(lr_at_step(c, 0), 0.1);
  EXPECT_DOUBLE_EQ(lr_at_step(c, 7), 0.1);
  EXPECT_DOUBLE_EQ(lr_at_step(c, 8), 0.1 * 0.1);
  EXPECT_DOUBLE_EQ(lr_at_step(c, 17), 0.1 * 0.1 * 0.1);
  EXPECT_DOUBLE_EQ(lr_at_step(c, 18), 0.1 * 0.1 * 0.1 * 0.1);
  EXPECT_DOUBLE_EQ(lr_at_step(c, 40), 0.1 * 0.1 * 0.1 * 0.1);
}

TEST(Config, MethodDefaults) {
  const auto d = default_config(Method::dcq);
  EXPECT_EQ(d.s, 50.0);
  EXPECT_EQ(d.m, 0.3);
  EXPECT_EQ(d.alpha, 0.999);
  const auto b = default_config(Method::cosface_full);
  EXPECT_EQ(b.s, 64.0);
  EXPECT_EQ(b.m, 0.35);
}

TEST(Config, JsonRoundTrip) {
  const TrainConfig c = tiny_config(Method::cosface_head_only);
  const TrainConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
}

TEST(Config, RejectsUnknownKeysAndInvalidValues) {
  EXPECT_THROW(config_from_json({{"queue", 5}}), ConfigError);
  EXPECT_THROW(config_from_json({{"method", "arcface"}}), ConfigError);
  EXPECT_THROW(config_from_json({{"K", 8}, {"B", 16}}), ConfigError);
  EXPECT_THROW(config_from_json({{"m", 1.0}}), ConfigError);
  EXPECT_THROW(config_from_json({{"alpha", 1.5}}), ConfigError);
  EXPECT_NO_THROW(config_from_json({{"K", 16}, {"B", 16}}));
}

TEST(Config, MethodSwitchPicksThatMethodsDefaults) {
  const auto c = config_from_json({{"method", "cosface-full"}, {"m", 0.2}});
  EXPECT_EQ(c.s, 64.0);
  EXPECT_EQ(c.m, 0.2);
}

TEST(Config, FallbackSeed) {
  EXPECT_EQ(config_from_json(nlohmann::json::object(), 77).seed, 77u);
  EXPECT_EQ(config_from_json({{"seed", 5}}, 77).seed, 5u);
}

TEST(Config, Overrides) {
  nlohmann::json j = nlohmann::json::object();
  apply_override(j, "K=64");
  apply_override(j, "sampling=class");
  apply_override(j, "hidden=[8,8]");
  const auto c = config_from_json(j);
  EXPECT_EQ(c.K, 64);
  EXPECT_EQ(c.sampling, Sampling::class_uniform);
  EXPECT_EQ(c.hidden, (std::vector<Index>{8, 8}));
  EXPECT_THROW(apply_override(j, "novalue"), ConfigError);
}

TEST(Trainer, IdenticalRunsAreBitIdentical) {
  const auto c = tiny_config(Method::dcq);
  const Experiment e = build_experiment(c);
  const auto a = run_training(c, e), b = run_training(c, e);
  ASSERT_EQ(a.state.history.size(), 6u);
  for (std::size_t i = 0; i < a.state.history.size(); ++i) {
    EXPECT_EQ(a.state.history[i].train_loss, b.state.history[i].train_loss);
    EXPECT_EQ(a.state.history[i].ver_acc, b.state.history[i].ver_acc);
  }
  for (std::size_t i = 0; i < a.state.extractor.tensors.size(); ++i) {
    EXPECT_EQ(a.state.extractor.tensors[i], b.state.extractor.tensors[i]);
  }
}

TEST(Trainer, QueueFillsAfterCeilKOverBIterations) {
  auto c = tiny_config(Method::dcq);
  c.K = 20;
  c.B = 8;
  const Experiment e = build_experiment(c);
  Trainer t(e, c);
  t.iterate();
  t.iterate();
  EXPECT_EQ(t.state().queue->filled(), 16);
  t.iterate();
  EXPECT_EQ(t.state().queue->filled(), 20);
}

TEST(Trainer, PositiveWeightsEnterQueueAfterTheirStep) {
  const auto c = tiny_config(Method::dcq);
  const Experiment e = build_experiment(c);
  Trainer t(e, c);
  for (int step = 0; step < 5; ++step) {
    const ClassQueue before = *t.state().queue;
    const StepResult r = t.iterate();
    const ClassQueue& after = *t.state().queue;
    for (Index i = 0; i < c.B; ++i) {
      const Index slot = (before.cursor() + i) % c.K;
      EXPECT_EQ(after.weights().col(slot).transpose(), r.positive_weights.row(i));
      EXPECT_EQ(after.labels()[static_cast<std::size_t>(slot)], r.labels[static_cast<std::size_t>(i)]);
    }
  }
}

TEST(Trainer, GeneratorTracksExtractorByEma) {
  auto c = tiny_config(Method::dcq);
  c.alpha = 0.5;
  const Experiment e = build_experiment(c);
  Trainer t(e, c);
  const MlpParams shadow_before = t.state().generator->shadow;
  t.iterate();
  const auto& s = t.state();
  for (std::size_t i = 0; i < shadow_before.tensors.size(); ++i) {
    const Tensor expected = 0.5 * shadow_before.tensors[i] + 0.5 * s.extractor.tensors[i];
    EXPECT_LE((s.generator->shadow.tensors[i] - expected).cwiseAbs().maxCoeff(), 1e-15);
  }
}

TEST(Trainer, DcqOptimizerHoldsOnlyExtractorState) {
  const auto c = tiny_config(Method::dcq);
  const auto s = initial_state(c, c.C);
  EXPECT_EQ(s.optimizer.velocity.size(), s.extractor.tensors.size());
  const auto f = initial_state(tiny_config(Method::cosface_full), c.C);
  EXPECT_EQ(f.optimizer.velocity.size(), f.extractor.tensors.size() + 1);
}

TEST(Trainer, HeadOnlyTrainsOnRetainedClasses) {
  const auto c = tiny_config(Method::cosface_head_only);
  const Experiment e = build_experiment(c);
  Trainer t(e, c);
  const auto expected = filter_head_classes(e.counts, c.min_instances).retained;
  EXPECT_EQ(t.identities(), expected);
  EXPECT_EQ(t.state().head->classes(), static_cast<Index>(expected.size()));
  for (std::uint64_t step = 0; step < 5; ++step) {
    for (Index y : t.sampler().sample(c.B, c.seed, step).y) EXPECT_LT(y, static_cast<Index>(expected.size()));
  }
}

TEST(Trainer, BaselinesReduceTheirLoss) {
  for (Method m : {Method::cosface_full, Method::cosface_head_only}) {
    auto c = tiny_config(m);
    c.epochs = 8;
    c.decay_epochs = {};
    const auto r = run_training(c, build_experiment(c));
    EXPECT_LT(r.state.history.back().train_loss, r.state.history.front().train_loss) << to_string(m);
  }
}

TEST(Trainer, SeparatedIdentitiesReachHighVerification) {
  auto c = tiny_config(Method::dcq);
  c.C = 10;
  c.reserved = 10;
  c.sigma = 0.01;
  c.longtail = {0.0, 10, 10};
  c.K = 16;
  c.B = 8;
  c.epochs = 20;
  c.decay_epochs = {15};
  c.eval_pairs = 200;
  c.eval_probes = 10;
  c.eval_distractors = 10;
  const auto r = run_training(c, build_experiment(c));
  double best = 0.0;
  for (const auto& m : r.state.history) best = std::max(best, m.ver_acc);
  EXPECT_GE(best, 0.95);
}

TEST(Trainer, NonFiniteLossIsNumericError) {
  const auto c = tiny_config(Method::dcq);
  const Experiment e = build_experiment(c);
  Trainer t(e, c);
  PairBatch batch = t.sampler().sample(c.B, c.seed, 0);
  batch.x_t(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    t.train_step(batch, 0.1);
    FAIL() << "expected NumericError";
  } catch (const NumericError& err) {
    EXPECT_NE(std::string(err.what()).find("batch labels"), std::string::npos);
  }
}

TEST(Trainer, EvalEveryLeavesGapsButAlwaysScoresTheLastEpoch) {
  auto c = tiny_config(Method::dcq);
  c.eval_every = 4;
  const auto r = run_training(c, build_experiment(c));
  ASSERT_EQ(r.state.history.size(), 6u);
  EXPECT_TRUE(std::isnan(r.state.history[0].ver_acc));
  EXPECT_FALSE(std::isnan(r.state.history[3].ver_acc));
  EXPECT_TRUE(std::isnan(r.state.history[4].ver_acc));
  EXPECT_FALSE(std::isnan(r.state.history[5].ver_acc));
  EXPECT_EQ(r.state.history[2].wall_seconds, 0.0);
}

TEST(Trainer, RunningPastTheEndIsAContractError) {
  auto c = tiny_config(Method::dcq);
  c.epochs = 1;
  const Experiment e = build_experiment(c);
  Trainer t(e, c);
  t.run_epoch();
  EXPECT_TRUE(t.finished());
  EXPECT_THROW(t.run_epoch(), ContractError);
}

}  // namespace
}  // namespace dcq
