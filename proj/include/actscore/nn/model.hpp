#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "actscore/error.hpp"
#include "actscore/nn/layers.hpp"
#include "actscore/parallel.hpp"
#include "actscore/rng.hpp"
#include "actscore/tensor.hpp"
#include "actscore/trace.hpp"

namespace actscore::nn {

/// Trainable tensors, one list per layer (empty for parameter-free layers).
using Parameters = std::vector<std::vector<Tensor>>;

/// A sequential network whose last layer is softmax.
struct Model {
  Shape input_shape;  // {channels, height, width}
  std::vector<LayerSpec> layers;
  Parameters params;
  std::uint64_t rng_seed = 0;

  friend bool operator==(const Model&, const Model&) = default;
};

namespace detail {

inline bool produces_nonnegative(LayerKind kind, bool input_nonnegative) {
  switch (kind) {
    case LayerKind::relu:
    case LayerKind::softmax:
      return true;
    case LayerKind::maxpool2:
    case LayerKind::dropout:
    case LayerKind::flatten:
      return input_nonnegative;
    default:
      return false;
  }
}

}  // namespace detail

/// Checks shape compatibility, parameter shapes and finiteness, softmax
/// termination, and that every capture point is provably nonnegative.
/// Returns the output shape of every layer.
inline std::vector<Shape> validate_model(const Model& model) {
  if (model.layers.empty() || model.layers.back().kind != LayerKind::softmax)
    throw ArgumentError("model must end with a softmax layer");
  if (model.params.size() != model.layers.size())
    throw ArgumentError("model has " + std::to_string(model.params.size()) + " parameter lists for " +
                        std::to_string(model.layers.size()) + " layers");
  std::vector<Shape> shapes;
  Shape cur = model.input_shape;
  bool nonneg = false;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    if (layer.kind == LayerKind::softmax && i + 1 != model.layers.size())
      throw ArgumentError("softmax layer '" + layer.name + "' must be last");
    if (layer.kind == LayerKind::dropout && !(layer.keep_prob > 0.0 && layer.keep_prob <= 1.0))
      throw ArgumentError("dropout layer '" + layer.name + "' keep probability must be in (0, 1]");
    cur = layer_output_shape(layer, cur);
    nonneg = detail::produces_nonnegative(layer.kind, nonneg);
    if (layer.capture && !nonneg)
      throw ArgumentError("capture point '" + layer.name + "' is not guaranteed nonnegative");
    const auto expected = layer_param_shapes(layer);
    const auto& have = model.params[i];
    if (have.size() != expected.size())
      throw ShapeError("layer '" + layer.name + "' expects " + std::to_string(expected.size()) +
                       " parameter tensors, has " + std::to_string(have.size()));
    for (std::size_t p = 0; p < expected.size(); ++p) {
      if (have[p].shape() != expected[p])
        throw ShapeError("layer '" + layer.name + "' parameter " + std::to_string(p) + ": expected " +
                         shape_str(expected[p]) + ", got " + shape_str(have[p].shape()));
      if (!have[p].all_finite()) throw ArgumentError("layer '" + layer.name + "' has non-finite parameters");
    }
    shapes.push_back(cur);
  }
  return shapes;
}

inline std::size_t num_classes(const Model& model) { return validate_model(model).back().at(0); }

inline std::size_t parameter_count(const Parameters& params) {
  std::size_t n = 0;
  for (const auto& layer : params)
    for (const auto& t : layer) n += t.size();
  return n;
}

/// Zero tensors shaped like `params`.
inline Parameters zeros_like(const Parameters& params) {
  Parameters out;
  out.reserve(params.size());
  for (const auto& layer : params) {
    auto& dst = out.emplace_back();
    for (const auto& t : layer) dst.push_back(Tensor::zeros(t.shape()));
  }
  return out;
}

inline void add_into(Parameters& dst, const Parameters& src) {
  for (std::size_t l = 0; l < dst.size(); ++l)
    for (std::size_t p = 0; p < dst[l].size(); ++p) {
      double* d = dst[l][p].data();
      const double* s = src[l][p].data();
      for (std::size_t i = 0; i < dst[l][p].size(); ++i) d[i] += s[i];
    }
}

/// Builds a model from layer specs with He-normal weights and zero biases,
/// drawn from a stream keyed by `seed`.
inline Model make_model(Shape input_shape, std::vector<LayerSpec> layers, std::uint64_t seed) {
  Model model{.input_shape = std::move(input_shape), .layers = std::move(layers), .params = {}, .rng_seed = seed};
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    auto& dst = model.params.emplace_back();
    const auto shapes = layer_param_shapes(model.layers[i]);
    if (shapes.empty()) continue;
    Tensor w(shapes[0]);
    const std::size_t fan_in = w.size() / shapes[0][0];
    const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    Rng rng(derive_seed(seed, {0x1a17, i}));
    for (auto& v : w.values()) v = stddev * rng.normal();
    dst.push_back(std::move(w));
    dst.push_back(Tensor::zeros(shapes[1]));
  }
  validate_model(model);
  return model;
}

/// Sizes of the default small CNN.
struct DefaultArchitecture {
  std::size_t conv1_channels = 8;
  std::size_t conv2_channels = 16;
  std::size_t hidden_units = 64;
  double keep_prob = 0.5;
};

/// Two conv blocks (3x3 conv, relu, 2x2 max pool), a hidden dense layer with
/// relu and dropout, and a dense output with softmax. Capture points: both
/// pooled block outputs, the hidden relu, and the softmax.
inline Model make_default_model(const Shape& input_shape, std::size_t classes, std::uint64_t seed,
                                const DefaultArchitecture& arch = {}) {
  if (input_shape.size() != 3) throw ShapeError("input shape must be [C,H,W], got " + shape_str(input_shape));
  const std::size_t flat = arch.conv2_channels * (input_shape[1] / 4) * (input_shape[2] / 4);
  std::vector<LayerSpec> layers{
      LayerSpec::conv2d("conv1", input_shape[0], arch.conv1_channels, 3, 3),
      LayerSpec::simple("relu1", LayerKind::relu),
      LayerSpec::simple("pool1", LayerKind::maxpool2, true),
      LayerSpec::conv2d("conv2", arch.conv1_channels, arch.conv2_channels, 3, 3),
      LayerSpec::simple("relu2", LayerKind::relu),
      LayerSpec::simple("pool2", LayerKind::maxpool2, true),
      LayerSpec::simple("flatten", LayerKind::flatten),
      LayerSpec::linear("fc1", flat, arch.hidden_units),
      LayerSpec::simple("relu3", LayerKind::relu, true),
      LayerSpec::dropout("drop1", arch.keep_prob),
      LayerSpec::linear("fc2", arch.hidden_units, classes),
      LayerSpec::simple("softmax", LayerKind::softmax, true),
  };
  return make_model(input_shape, std::move(layers), seed);
}

/// Controls train-mode behaviour of a forward pass. Dropout masks are drawn
/// from a stream keyed by `dropout_key`, so a pass can be replayed exactly.
struct PassMode {
  bool train = false;
  std::uint64_t dropout_key = 0;
};

namespace detail {

inline void check_input(const Model& model, const Tensor& image) {
  if (image.shape() != model.input_shape)
    throw ShapeError("model input: expected " + shape_str(model.input_shape) + ", got " + shape_str(image.shape()));
}

inline std::vector<LayerCache> forward_caches(const Model& model, const Tensor& image, PassMode mode) {
  check_input(model, image);
  std::vector<LayerCache> caches;
  caches.reserve(model.layers.size());
  const Tensor* cur = &image;
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    Rng rng(derive_seed(mode.dropout_key, {i}));
    caches.push_back(layer_forward_cached(model.layers[i], model.params[i], *cur, mode.train, &rng));
    cur = &caches.back().output;
  }
  return caches;
}

inline double cross_entropy(const Tensor& logits, std::size_t label) {
  const double m = *std::max_element(logits.values().begin(), logits.values().end());
  double z = 0.0;
  for (double v : logits.values()) z += std::exp(v - m);
  return m + std::log(z) - logits[label];
}

/// Loss of one sample and, when `grads` is non-null, its parameter gradients.
inline double sample_loss_grad(const Model& model, const Tensor& image, std::size_t label, PassMode mode,
                               Parameters* grads) {
  auto caches = forward_caches(model, image, mode);
  const LayerCache& soft = caches.back();
  const double loss = cross_entropy(soft.input, label);
  if (grads == nullptr) return loss;
  // Combined softmax + cross-entropy gradient w.r.t. the logits.
  Tensor g = soft.output;
  g[label] -= 1.0;
  for (std::size_t i = model.layers.size() - 1; i-- > 0;) {
    g = layer_backward(model.layers[i], model.params[i], caches[i], g, (*grads)[i]);
  }
  return loss;
}

}  // namespace detail

struct ForwardResult {
  Tensor logits;
  Tensor probs;
  ActivationTrace trace;
};

/// Eval-mode forward pass returning logits, softmax probabilities and the
/// activations at every capture point, in layer order.
inline ForwardResult forward_with_trace(const Model& model, const Tensor& image, std::uint64_t image_id = 0) {
  auto caches = detail::forward_caches(model, image, PassMode{});
  ForwardResult result;
  result.trace.image_id = image_id;
  for (std::size_t i = 0; i < model.layers.size(); ++i)
    if (model.layers[i].capture) result.trace.entries.push_back({model.layers[i].name, caches[i].output});
  result.logits = std::move(caches.back().input);
  result.probs = std::move(caches.back().output);
  return result;
}

/// Index of the largest element; ties go to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

struct Prediction {
  std::size_t label = 0;
  Tensor probs;
};

inline std::vector<Prediction> predict_batch(const Model& model, std::span<const Tensor> images) {
  validate_model(model);
  std::vector<Prediction> out(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    auto caches = detail::forward_caches(model, images[i], PassMode{});
    out[i].probs = std::move(caches.back().output);
    out[i].label = argmax(out[i].probs.values());
  });
  return out;
}

struct LossAndGrad {
  double loss = 0.0;
  Parameters grads;
};

/// Mean cross-entropy over the batch and its gradient. Per-sample gradients
/// are combined with `tree_reduce`, so the result is independent of the
/// number of worker threads. In train mode sample i uses dropout stream
/// derive_seed(mode.dropout_key, {i}).
inline LossAndGrad loss_and_grad(const Model& model, std::span<const Tensor> images,
                                 std::span<const std::size_t> labels, PassMode mode = {}) {
  if (images.empty()) throw ArgumentError("loss_and_grad: empty batch");
  if (images.size() != labels.size())
    throw ArgumentError("loss_and_grad: " + std::to_string(images.size()) + " images but " +
                        std::to_string(labels.size()) + " labels");
  const std::size_t classes = num_classes(model);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] >= classes)
      throw ArgumentError("label " + std::to_string(labels[i]) + " at batch index " + std::to_string(i) +
                          " is outside [0, " + std::to_string(classes) + ")");

  struct Part {
    double loss;
    Parameters grads;
  };
  std::vector<Part> parts(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    parts[i].grads = zeros_like(model.params);
    PassMode m = mode;
    m.dropout_key = derive_seed(mode.dropout_key, {i});
    parts[i].loss = detail::sample_loss_grad(model, images[i], labels[i], m, &parts[i].grads);
  });
  Part total = tree_reduce(std::move(parts), [](Part& a, const Part& b) {
    a.loss += b.loss;
    add_into(a.grads, b.grads);
  });
  const double inv = 1.0 / static_cast<double>(images.size());
  for (auto& layer : total.grads)
    for (auto& t : layer)
      for (auto& v : t.values()) v *= inv;
  return {total.loss * inv, std::move(total.grads)};
}

/// Largest relative error |a - n| / max(|a|, |n|, 1e-6) between analytic and
/// central-difference gradients over every parameter, for a single sample.
/// Dropout masks are held fixed across perturbations when `mode.train`.
inline double grad_check(const Model& model, const Tensor& image, std::size_t label, double h, PassMode mode = {}) {
  if (!(h > 0.0)) throw ArgumentError("grad_check: step h must be positive");
  const std::size_t batch_label[] = {label};
  const auto analytic = loss_and_grad(model, std::span<const Tensor>(&image, 1), batch_label, mode).grads;
  PassMode sample_mode = mode;
  sample_mode.dropout_key = derive_seed(mode.dropout_key, {0});
  Model probe = model;
  double worst = 0.0;
  for (std::size_t l = 0; l < probe.params.size(); ++l)
    for (std::size_t p = 0; p < probe.params[l].size(); ++p)
      for (std::size_t i = 0; i < probe.params[l][p].size(); ++i) {
        double& w = probe.params[l][p][i];
        const double saved = w;
        w = saved + h;
        const double up = detail::sample_loss_grad(probe, image, label, sample_mode, nullptr);
        w = saved - h;
        const double down = detail::sample_loss_grad(probe, image, label, sample_mode, nullptr);
        w = saved;
        const double numeric = (up - down) / (2.0 * h);
        const double a = analytic[l][p][i];
        const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
        worst = std::max(worst, std::abs(a - numeric) / denom);
      }
  return worst;
}

}  // namespace actscore::nn
