#include <gtest/gtest.h>

#include "actscore/nn/adam.hpp"
#include "actscore/nn/model.hpp"

using namespace actscore;
using namespace actscore::nn;

namespace {

Tensor random_image(const Shape& shape, std::uint64_t seed) {
  Tensor t(shape);
  Rng rng(seed);
  for (auto& v : t.values()) v = rng.uniform();
  return t;
}

Model tiny_model(std::uint64_t seed) {
  DefaultArchitecture arch{2, 3, 6, 0.5};
  return make_default_model({1, 8, 8}, 3, seed, arch);
}

}  // namespace

TEST(Model, DefaultArchitectureLayout) {
  const Model m = make_default_model({1, 16, 16}, 4, 1);
  ASSERT_EQ(m.layers.size(), 12u);
  std::vector<std::string> captured;
  for (const auto& l : m.layers)
    if (l.capture) captured.push_back(l.name);
  EXPECT_EQ(captured, (std::vector<std::string>{"pool1", "pool2", "relu3", "softmax"}));
  EXPECT_EQ(num_classes(m), 4u);
  // conv1 8*1*9+8, conv2 16*8*9+16, fc1 256*64+64, fc2 64*4+4
  EXPECT_EQ(parameter_count(m.params), 80u + 1168u + 16448u + 260u);
}

TEST(Model, InitIsDeterministicPerSeed) {
  EXPECT_EQ(tiny_model(5), tiny_model(5));
  EXPECT_NE(tiny_model(5).params, tiny_model(6).params);
}

TEST(Model, ValidateRejectsBadModels) {
  Model m = tiny_model(1);
  Model no_softmax = m;
  no_softmax.layers.pop_back();
  no_softmax.params.pop_back();
  EXPECT_THROW(validate_model(no_softmax), ArgumentError);

  Model bad_capture = m;
  bad_capture.layers[0].capture = true;  // conv output can be negative
  EXPECT_THROW(validate_model(bad_capture), ArgumentError);

  Model bad_param = m;
  bad_param.params[0][0] = Tensor({1});
  EXPECT_THROW(validate_model(bad_param), ShapeError);

  Model nan_param = m;
  nan_param.params[0][0][0] = std::nan("");
  EXPECT_THROW(validate_model(nan_param), ArgumentError);
}

TEST(Model, ForwardTraceCapturesInLayerOrder) {
  const Model m = tiny_model(2);
  const auto fr = forward_with_trace(m, random_image({1, 8, 8}, 3), 77);
  EXPECT_EQ(fr.trace.image_id, 77u);
  ASSERT_EQ(fr.trace.entries.size(), 4u);
  EXPECT_EQ(fr.trace.entries[0].activation.shape(), (Shape{2, 4, 4}));
  EXPECT_EQ(fr.trace.entries[1].activation.shape(), (Shape{3, 2, 2}));
  EXPECT_EQ(fr.trace.entries[2].activation.shape(), (Shape{6}));
  EXPECT_EQ(fr.trace.entries[3].activation, fr.probs);
  for (const auto& e : fr.trace.entries) EXPECT_TRUE(e.activation.all_nonnegative());
}

TEST(Model, ForwardRejectsWrongInputShape) {
  EXPECT_THROW(forward_with_trace(tiny_model(1), Tensor({1, 8, 7})), ShapeError);
}

TEST(Model, ArgmaxTiesGoLow) {
  const std::vector<double> v{0.2, 0.4, 0.4};
  EXPECT_EQ(argmax(v), 1u);
}

TEST(Model, LossAndGradRejectsBadLabels) {
  const Model m = tiny_model(1);
  const std::vector<Tensor> images{random_image({1, 8, 8}, 1), random_image({1, 8, 8}, 2)};
  const std::vector<std::size_t> labels{0, 3};
  try {
    loss_and_grad(m, images, labels);
    FAIL();
  } catch (const ArgumentError& e) {
    EXPECT_NE(std::string(e.what()).find("batch index 1"), std::string::npos);
  }
}

TEST(Model, GradientMatchesFiniteDifferencesEvalMode) {
  const Model m = tiny_model(3);
  EXPECT_LT(grad_check(m, random_image({1, 8, 8}, 4), 1, 1e-5), 1e-4);
}

TEST(Model, GradientMatchesFiniteDifferencesWithDropoutMask) {
  const Model m = tiny_model(4);
  EXPECT_LT(grad_check(m, random_image({1, 8, 8}, 5), 2, 1e-5, PassMode{true, 1234}), 1e-4);
}

TEST(Model, BatchGradientIsMeanOfSampleGradients) {
  const Model m = tiny_model(6);
  const std::vector<Tensor> images{random_image({1, 8, 8}, 1), random_image({1, 8, 8}, 2),
                                   random_image({1, 8, 8}, 3)};
  const std::vector<std::size_t> labels{0, 1, 2};
  const auto all = loss_and_grad(m, images, labels);
  double loss = 0;
  Parameters sum = zeros_like(m.params);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto one = loss_and_grad(m, std::span(&images[i], 1), std::span(&labels[i], 1));
    loss += one.loss;
    add_into(sum, one.grads);
  }
  EXPECT_NEAR(all.loss, loss / 3, 1e-12);
  for (std::size_t l = 0; l < sum.size(); ++l)
    for (std::size_t p = 0; p < sum[l].size(); ++p)
      for (std::size_t i = 0; i < sum[l][p].size(); ++i) EXPECT_NEAR(all.grads[l][p][i], sum[l][p][i] / 3, 1e-12);
}

TEST(Model, GradientIndependentOfThreadCount) {
  const Model m = tiny_model(7);
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;
  for (std::size_t i = 0; i < 9; ++i) {
    images.push_back(random_image({1, 8, 8}, 100 + i));
    labels.push_back(i % 3);
  }
  setenv("ACTSCORE_THREADS", "1", 1);
  const auto one = loss_and_grad(m, images, labels, PassMode{true, 5});
  setenv("ACTSCORE_THREADS", "4", 1);
  const auto four = loss_and_grad(m, images, labels, PassMode{true, 5});
  unsetenv("ACTSCORE_THREADS");
  EXPECT_EQ(one.loss, four.loss);
  EXPECT_EQ(one.grads, four.grads);
}

TEST(Adam, FirstStepMovesBySignTimesLearningRate) {
  Parameters params{{Tensor({3}, {1.0, -2.0, 0.5})}};
  Parameters grads{{Tensor({3}, {0.3, -4.0, 0.0})}};
  AdamState st = AdamState::for_params(params, 0.1);
  adam_step(st, params, grads);
  // bias-corrected m/sqrt(v) = g/|g| on the first step
  EXPECT_NEAR(params[0][0][0], 1.0 - 0.1, 1e-7);
  EXPECT_NEAR(params[0][0][1], -2.0 + 0.1, 1e-7);
  EXPECT_EQ(params[0][0][2], 0.5);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, MatchesHandComputedSecondStep) {
  Parameters params{{Tensor({1}, {0.0})}};
  AdamState st = AdamState::for_params(params, 1e-3);
  adam_step(st, params, Parameters{{Tensor({1}, {1.0})}});
  adam_step(st, params, Parameters{{Tensor({1}, {-0.5})}});
  // independent arithmetic of the update rule
  double m = 0, v = 0, w = 0;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? 1.0 : -0.5;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    w -= 1e-3 * mh / (std::sqrt(vh) + 1e-8);
  }
  EXPECT_NEAR(params[0][0][0], w, 1e-15);
}

TEST(Adam, RejectsMismatchedLayout) {
  Parameters params{{Tensor({2})}};
  AdamState st = AdamState::for_params(params, 1e-3);
  EXPECT_THROW(adam_step(st, params, Parameters{{Tensor({3})}}), ShapeError);
}
