#include <gtest/gtest.h>

#include "actscore/nn/gradcheck.hpp"
#include "actscore/nn/layers.hpp"
#include "oracles.hpp"

using namespace actscore;
using namespace actscore::nn;

namespace {

Tensor random_tensor(const Shape& shape, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  Rng rng(seed);
  for (auto& v : t.values()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

}  // namespace

TEST(Layers, OutputShapes) {
  EXPECT_EQ(layer_output_shape(LayerSpec::conv2d("c", 3, 5, 3, 3), {3, 8, 6}), (Shape{5, 8, 6}));
  EXPECT_EQ(layer_output_shape(LayerSpec::simple("p", LayerKind::maxpool2), {2, 7, 5}), (Shape{2, 3, 2}));
  EXPECT_EQ(layer_output_shape(LayerSpec::simple("f", LayerKind::flatten), {2, 3, 4}), (Shape{24}));
  EXPECT_EQ(layer_output_shape(LayerSpec::linear("l", 24, 10), {24}), (Shape{10}));
  EXPECT_EQ(layer_output_shape(LayerSpec::simple("s", LayerKind::softmax), {10}), (Shape{10}));
}

TEST(Layers, ShapeErrorsNameLayerAndShapes) {
  try {
    layer_output_shape(LayerSpec::conv2d("conv7", 3, 5, 3, 3), {2, 8, 8});
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("conv7"), std::string::npos);
    EXPECT_NE(msg.find("[3,H,W]"), std::string::npos);
    EXPECT_NE(msg.find("[2,8,8]"), std::string::npos);
  }
  EXPECT_THROW(layer_output_shape(LayerSpec::linear("fc", 10, 2), {9}), ShapeError);
  EXPECT_THROW(layer_output_shape(LayerSpec::simple("p", LayerKind::maxpool2), {1, 1, 4}), ShapeError);
}

TEST(Layers, ConvMatchesNaiveOracleExactly) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng pick(seed);
    const std::size_t C = 1 + pick.below(3), O = 1 + pick.below(4);
    const std::size_t H = 2 + pick.below(7), W = 2 + pick.below(7);
    const std::size_t K = 1 + 2 * pick.below(3);
    const auto spec = LayerSpec::conv2d("c", C, O, K, K);
    const Tensor x = random_tensor({C, H, W}, seed * 3);
    const Tensor w = random_tensor({O, C, K, K}, seed * 3 + 1);
    const Tensor b = random_tensor({O}, seed * 3 + 2);
    const std::vector<Tensor> params{w, b};
    const Tensor got = layer_forward(spec, params, x, false, nullptr);
    EXPECT_EQ(got, oracle::conv2d(x, w, b)) << "seed " << seed;
  }
}

TEST(Layers, ReluAndMaxpoolOutputsNonnegativeAfterRelu) {
  const Tensor x = random_tensor({2, 6, 6}, 5);
  const Tensor r = layer_forward(LayerSpec::simple("r", LayerKind::relu), {}, x, false, nullptr);
  EXPECT_TRUE(r.all_nonnegative());
  const Tensor p = layer_forward(LayerSpec::simple("p", LayerKind::maxpool2), {}, r, false, nullptr);
  EXPECT_TRUE(p.all_nonnegative());
  EXPECT_EQ(p.shape(), (Shape{2, 3, 3}));
}

TEST(Layers, MaxpoolPicksWindowMaximum) {
  Tensor x({1, 2, 4}, {1, 5, 2, 2, 3, 4, 9, -1});
  const Tensor y = layer_forward(LayerSpec::simple("p", LayerKind::maxpool2), {}, x, false, nullptr);
  EXPECT_EQ(y.vec(), (std::vector<double>{5, 9}));
}

TEST(Layers, DropoutEvalModeIsIdentity) {
  const Tensor x = random_tensor({10}, 3);
  EXPECT_EQ(layer_forward(LayerSpec::dropout("d", 0.5), {}, x, false, nullptr), x);
}

TEST(Layers, DropoutTrainModeScalesKeptUnits) {
  const Tensor x = Tensor::filled({1000}, 1.0);
  Rng rng(1);
  const Tensor y = layer_forward(LayerSpec::dropout("d", 0.25), {}, x, true, &rng);
  std::size_t kept = 0;
  for (double v : y.values()) {
    ASSERT_TRUE(v == 0.0 || v == 4.0);
    kept += v != 0.0;
  }
  EXPECT_NEAR(static_cast<double>(kept) / 1000.0, 0.25, 0.05);
  EXPECT_THROW(layer_forward(LayerSpec::dropout("d", 0.5), {}, x, true, nullptr), ArgumentError);
}

TEST(Layers, SoftmaxSumsToOneAndIsShiftStable) {
  Tensor x({4}, {1000.0, 1001.0, 999.0, 1000.5});
  const Tensor y = layer_forward(LayerSpec::simple("s", LayerKind::softmax), {}, x, false, nullptr);
  double s = 0;
  for (double v : y.values()) s += v;
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_TRUE(y.all_finite());
  EXPECT_GT(y[1], y[3]);
}

// Every layer kind against central differences at h = 1e-5, tolerance 1e-4.
class LayerGradient : public ::testing::TestWithParam<int> {};

TEST_P(LayerGradient, MatchesCentralDifferences) {
  const auto kind = static_cast<LayerKind>(GetParam());
  LayerSpec spec;
  Tensor input;
  std::vector<Tensor> params;
  switch (kind) {
    case LayerKind::conv2d:
      spec = LayerSpec::conv2d("c", 2, 3, 3, 3);
      input = random_tensor({2, 5, 4}, 1);
      params = {random_tensor({3, 2, 3, 3}, 2), random_tensor({3}, 3)};
      break;
    case LayerKind::linear:
      spec = LayerSpec::linear("l", 7, 4);
      input = random_tensor({7}, 4);
      params = {random_tensor({4, 7}, 5), random_tensor({4}, 6)};
      break;
    case LayerKind::relu:
      spec = LayerSpec::simple("r", LayerKind::relu);
      input = Tensor({6}, {-0.7, 0.3, 1.2, -0.05, 0.6, -2.0});  // away from the kink
      break;
    case LayerKind::maxpool2:
      spec = LayerSpec::simple("p", LayerKind::maxpool2);
      input = Tensor({1, 2, 4}, {0.1, 0.9, -0.4, 0.2, 0.5, -0.3, 0.7, 1.4});  // distinct window maxima
      break;
    case LayerKind::dropout:
      spec = LayerSpec::dropout("d", 0.6);
      input = random_tensor({12}, 7);
      break;
    case LayerKind::flatten:
      spec = LayerSpec::simple("f", LayerKind::flatten);
      input = random_tensor({2, 2, 3}, 8);
      break;
    case LayerKind::softmax:
      spec = LayerSpec::simple("s", LayerKind::softmax);
      input = random_tensor({5}, 9, -2.0, 2.0);
      break;
  }
  EXPECT_LT(layer_grad_check(spec, params, input, 1e-5, 99), 1e-4) << kind_name(kind);
}

INSTANTIATE_TEST_SUITE_P(AllKinds, LayerGradient, ::testing::Range(0, 7),
                         [](const auto& info) { return std::string(kind_name(static_cast<LayerKind>(info.param))); });
