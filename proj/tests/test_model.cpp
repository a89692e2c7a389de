#include <gtest/gtest.h>

#include <random>

#include "dcq/model.hpp"
#include "test_util.hpp"

namespace dcq {
namespace {

TEST(Extractor, ParameterCount) {
  const auto p = init_extractor({8, 16, 4}, 1);
  EXPECT_EQ(p.parameter_count(), 214u);
  EXPECT_EQ(p.tensors.size(), 6u);
}

TEST(Extractor, InitIsDeterministic) {
  const auto a = init_extractor({8, 16, 4}, 3), b = init_extractor({8, 16, 4}, 3), c = init_extractor({8, 16, 4}, 4);
  for (std::size_t i = 0; i < a.tensors.size(); ++i) EXPECT_EQ(a.tensors[i], b.tensors[i]);
  EXPECT_NE(a.weight(0), c.weight(0));
}

TEST(Extractor, InitialBiasesAndSlopes) {
  const auto p = init_extractor({8, 16, 16, 4}, 3);
  for (std::size_t l = 0; l < p.layer_count(); ++l) {
    EXPECT_TRUE(p.bias(l).isZero(0.0));
    EXPECT_EQ(p.slope(l), kInitialSlope);
  }
}

TEST(Extractor, InitScaleFollowsFanIn) {
  const auto p = init_extractor({400, 300, 4}, 5);
  const Tensor& w = p.weight(0);
  const double var = w.array().square().mean() - w.mean() * w.mean();
  EXPECT_NEAR(var, 1.0 / 400.0, 0.05 / 400.0);
}

TEST(Extractor, RejectsDegenerateDims) {
  EXPECT_THROW(init_extractor({8}, 1), ConfigError);
  EXPECT_THROW(init_extractor({8, 4}, 1), ConfigError);
  EXPECT_THROW(init_extractor({8, 0, 4}, 1), ConfigError);
}

TEST(Extractor, TensorNamesAndDecay) {
  const auto p = init_extractor({3, 4, 2}, 1);
  EXPECT_EQ(p.tensor_name(0), "layer0.weight");
  EXPECT_EQ(p.tensor_name(4), "layer1.bias");
  EXPECT_EQ(p.tensor_name(5), "layer1.slope");
  EXPECT_TRUE(MlpParams::decays(3));
  EXPECT_FALSE(MlpParams::decays(4));
  EXPECT_FALSE(MlpParams::decays(5));
}

TEST(Features, OutputShape) {
  const auto p = init_extractor({6, 10, 5}, 2);
  for (Index b : {1, 3, 17}) {
    const Tensor f = extract_features(p, Tensor::Ones(b, 6));
    EXPECT_EQ(f.rows(), b);
    EXPECT_EQ(f.cols(), 5);
  }
}

TEST(Features, WrongInputWidthIsShapeError) {
  const auto p = init_extractor({6, 10, 5}, 2);
  EXPECT_THROW(extract_features(p, Tensor::Ones(2, 5)), ShapeError);
}

TEST(Features, TapedAndInferencePassesAgree) {
  std::mt19937_64 gen(4);
  const auto p = init_extractor({6, 10, 7, 5}, 2);
  const Tensor x = testing::random_tensor(4, 6, gen);
  Tape tape;
  const Var f = extract_features(tape, p, bind_parameters(tape, p), tape.constant(x));
  EXPECT_EQ(tape.value(f), extract_features(p, x));
}

// With zero biases and every pre-activation positive the network is linear
// along a ray, so doubling the input doubles the embedding.
TEST(Features, PositivelyHomogeneous) {
  MlpParams p = init_extractor({3, 4, 2}, 2);
  p.weight(0) = p.weight(0).cwiseAbs();
  const Tensor x = (Tensor(1, 3) << 0.5, 1.0, 0.25).finished();
  const Tensor one = extract_features(p, x);
  const Tensor two = extract_features(p, (2.0 * x).eval());
  EXPECT_LE((two - 2.0 * one).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Features, ConstantBindingsNeverReceiveGradients) {
  const auto p = init_extractor({3, 4, 2}, 2);
  Tape tape;
  const MlpVars vars = bind_constants(tape, p);
  const Var x = tape.parameter(Tensor::Ones(2, 3));
  tape.backward(sum(tape, extract_features(tape, p, vars, x)));
  for (Var v : vars.tensors) EXPECT_FALSE(tape.has_grad(v));
  EXPECT_TRUE(tape.has_grad(x));
}

}  // namespace
}  // namespace dcq
