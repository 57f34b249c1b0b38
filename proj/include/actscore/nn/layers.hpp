#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actscore/error.hpp"
#include "actscore/rng.hpp"
#include "actscore/tensor.hpp"

namespace actscore::nn {

/// Numeric tags double as the on-disk kind code in checkpoint files.
enum class LayerKind : std::uint32_t {
  conv2d = 0,
  relu = 1,
  maxpool2 = 2,
  linear = 3,
  dropout = 4,
  flatten = 5,
  softmax = 6,
};

inline const char* kind_name(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2: return "maxpool2";
    case LayerKind::linear: return "linear";
    case LayerKind::dropout: return "dropout";
    case LayerKind::flatten: return "flatten";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

/// One layer of a sequential network. Convolutions are stride 1 with zero
/// padding kernel/2 on each side, so odd kernels preserve spatial size.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::relu;
  std::size_t in_channels = 0;   // conv2d
  std::size_t out_channels = 0;  // conv2d
  std::size_t kernel_h = 0;      // conv2d
  std::size_t kernel_w = 0;      // conv2d
  std::size_t in_units = 0;      // linear
  std::size_t out_units = 0;     // linear
  double keep_prob = 1.0;        // dropout
  bool capture = false;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;

  static LayerSpec conv2d(std::string name, std::size_t in, std::size_t out, std::size_t kh, std::size_t kw) {
    LayerSpec s{.name = std::move(name), .kind = LayerKind::conv2d};
    s.in_channels = in;
    s.out_channels = out;
    s.kernel_h = kh;
    s.kernel_w = kw;
    return s;
  }
  static LayerSpec linear(std::string name, std::size_t in, std::size_t out) {
    LayerSpec s{.name = std::move(name), .kind = LayerKind::linear};
    s.in_units = in;
    s.out_units = out;
    return s;
  }
  static LayerSpec dropout(std::string name, double keep_prob) {
    LayerSpec s{.name = std::move(name), .kind = LayerKind::dropout};
    s.keep_prob = keep_prob;
    return s;
  }
  static LayerSpec simple(std::string name, LayerKind kind, bool capture = false) {
    LayerSpec s{.name = std::move(name), .kind = kind};
    s.capture = capture;
    return s;
  }

  std::size_t pad_h() const noexcept { return kernel_h / 2; }
  std::size_t pad_w() const noexcept { return kernel_w / 2; }
};

/// Shapes of the trainable tensors owned by a layer (weight then bias).
inline std::vector<Shape> layer_param_shapes(const LayerSpec& layer) {
  switch (layer.kind) {
    case LayerKind::conv2d:
      return {{layer.out_channels, layer.in_channels, layer.kernel_h, layer.kernel_w}, {layer.out_channels}};
    case LayerKind::linear:
      return {{layer.out_units, layer.in_units}, {layer.out_units}};
    default:
      return {};
  }
}

namespace detail {

[[noreturn]] inline void shape_mismatch(const LayerSpec& layer, const std::string& expected, const Shape& actual) {
  throw ShapeError("layer '" + layer.name + "' (" + kind_name(layer.kind) + "): expected input " + expected +
                   ", got " + shape_str(actual));
}

}  // namespace detail

/// Output shape for a given input shape; rejects incompatible inputs.
inline Shape layer_output_shape(const LayerSpec& layer, const Shape& in) {
  switch (layer.kind) {
    case LayerKind::conv2d:
      if (in.size() != 3 || in[0] != layer.in_channels)
        detail::shape_mismatch(layer, "[" + std::to_string(layer.in_channels) + ",H,W]", in);
      return {layer.out_channels, in[1], in[2]};
    case LayerKind::maxpool2:
      if (in.size() != 3 || in[1] < 2 || in[2] < 2) detail::shape_mismatch(layer, "[C,H>=2,W>=2]", in);
      return {in[0], in[1] / 2, in[2] / 2};
    case LayerKind::linear:
      if (in.size() != 1 || in[0] != layer.in_units)
        detail::shape_mismatch(layer, "[" + std::to_string(layer.in_units) + "]", in);
      return {layer.out_units};
    case LayerKind::flatten:
      return {shape_numel(in)};
    case LayerKind::softmax:
      if (in.size() != 1) detail::shape_mismatch(layer, "[N]", in);
      return in;
    case LayerKind::relu:
    case LayerKind::dropout:
      return in;
  }
  return in;
}

/// Everything backward needs from one forward step.
struct LayerCache {
  Tensor input;
  Tensor output;
  std::vector<std::uint32_t> argmax;  // maxpool2: flat input index per output
  std::vector<double> scale;          // dropout: 0 or 1/keep per element
};

namespace detail {

inline void conv2d_forward(const LayerSpec& layer, const Tensor& weight, const Tensor& bias, const Tensor& in,
                           Tensor& out) {
  const std::size_t C = layer.in_channels, O = layer.out_channels;
  const std::size_t H = in.dim(1), W = in.dim(2);
  const std::size_t KH = layer.kernel_h, KW = layer.kernel_w;
  const long ph = static_cast<long>(layer.pad_h()), pw = static_cast<long>(layer.pad_w());
  const double* x = in.data();
  const double* w = weight.data();
  double* y = out.data();
  // Per output element the accumulation order is bias, then (c, ky, kx)
  // ascending, which is exactly the order of a naive nested-loop convolution.
  for (std::size_t o = 0; o < O; ++o) {
    double* yo = y + o * H * W;
    std::fill(yo, yo + H * W, bias[o]);
    for (std::size_t c = 0; c < C; ++c) {
      const double* xc = x + c * H * W;
      for (std::size_t ky = 0; ky < KH; ++ky) {
        const long dy = static_cast<long>(ky) - ph;
        const std::size_t y0 = static_cast<std::size_t>(std::max(0L, -dy));
        const std::size_t y1 = static_cast<std::size_t>(std::min(static_cast<long>(H), static_cast<long>(H) - dy));
        for (std::size_t kx = 0; kx < KW; ++kx) {
          const double wv = w[((o * C + c) * KH + ky) * KW + kx];
          const long dx = static_cast<long>(kx) - pw;
          const std::size_t x0 = static_cast<std::size_t>(std::max(0L, -dx));
          const std::size_t x1 =
              static_cast<std::size_t>(std::min(static_cast<long>(W), static_cast<long>(W) - dx));
          for (std::size_t r = y0; r < y1; ++r) {
            double* yrow = yo + r * W;
            const double* xrow = xc + static_cast<std::size_t>(static_cast<long>(r) + dy) * W;
            for (std::size_t q = x0; q < x1; ++q) yrow[q] += wv * xrow[static_cast<long>(q) + dx];
          }
        }
      }
    }
  }
}

inline Tensor conv2d_backward(const LayerSpec& layer, const Tensor& weight, const Tensor& in, const Tensor& gout,
                              Tensor& gweight, Tensor& gbias) {
  const std::size_t C = layer.in_channels, O = layer.out_channels;
  const std::size_t H = in.dim(1), W = in.dim(2);
  const std::size_t KH = layer.kernel_h, KW = layer.kernel_w;
  const long ph = static_cast<long>(layer.pad_h()), pw = static_cast<long>(layer.pad_w());
  Tensor gin(in.shape());
  const double* x = in.data();
  const double* w = weight.data();
  const double* g = gout.data();
  double* gx = gin.data();
  double* gw = gweight.data();
  for (std::size_t o = 0; o < O; ++o) {
    const double* go = g + o * H * W;
    double bsum = 0.0;
    for (std::size_t i = 0; i < H * W; ++i) bsum += go[i];
    gbias[o] += bsum;
    for (std::size_t c = 0; c < C; ++c) {
      const double* xc = x + c * H * W;
      double* gxc = gx + c * H * W;
      for (std::size_t ky = 0; ky < KH; ++ky) {
        const long dy = static_cast<long>(ky) - ph;
        const std::size_t y0 = static_cast<std::size_t>(std::max(0L, -dy));
        const std::size_t y1 = static_cast<std::size_t>(std::min(static_cast<long>(H), static_cast<long>(H) - dy));
        for (std::size_t kx = 0; kx < KW; ++kx) {
          const std::size_t widx = ((o * C + c) * KH + ky) * KW + kx;
          const double wv = w[widx];
          const long dx = static_cast<long>(kx) - pw;
          const std::size_t x0 = static_cast<std::size_t>(std::max(0L, -dx));
          const std::size_t x1 =
              static_cast<std::size_t>(std::min(static_cast<long>(W), static_cast<long>(W) - dx));
          double acc = 0.0;
          for (std::size_t r = y0; r < y1; ++r) {
            const double* grow = go + r * W;
            const std::size_t src = static_cast<std::size_t>(static_cast<long>(r) + dy) * W;
            const double* xrow = xc + src;
            double* gxrow = gxc + src;
            for (std::size_t q = x0; q < x1; ++q) {
              acc += grow[q] * xrow[static_cast<long>(q) + dx];
              gxrow[static_cast<long>(q) + dx] += wv * grow[q];
            }
          }
          gw[widx] += acc;
        }
      }
    }
  }
  return gin;
}

}  // namespace detail

/// Runs one layer and records what backward needs. `rng` is consulted only by
/// dropout in train mode.
inline LayerCache layer_forward_cached(const LayerSpec& layer, std::span<const Tensor> params, const Tensor& input,
                                       bool train_mode, Rng* rng) {
  const Shape out_shape = layer_output_shape(layer, input.shape());
  LayerCache cache;
  cache.input = input;
  switch (layer.kind) {
    case LayerKind::conv2d: {
      cache.output = Tensor(out_shape);
      detail::conv2d_forward(layer, params[0], params[1], input, cache.output);
      break;
    }
    case LayerKind::linear: {
      cache.output = Tensor(out_shape);
      const Tensor& w = params[0];
      const std::size_t in = layer.in_units;
      for (std::size_t o = 0; o < layer.out_units; ++o) {
        double acc = params[1][o];
        const double* row = w.data() + o * in;
        for (std::size_t i = 0; i < in; ++i) acc += row[i] * input[i];
        cache.output[o] = acc;
      }
      break;
    }
    case LayerKind::relu: {
      cache.output = Tensor(out_shape);
      for (std::size_t i = 0; i < input.size(); ++i) cache.output[i] = input[i] > 0.0 ? input[i] : 0.0;
      break;
    }
    case LayerKind::maxpool2: {
      cache.output = Tensor(out_shape);
      const std::size_t C = input.dim(0), H = input.dim(1), W = input.dim(2);
      const std::size_t OH = out_shape[1], OW = out_shape[2];
      cache.argmax.resize(cache.output.size());
      for (std::size_t c = 0; c < C; ++c)
        for (std::size_t r = 0; r < OH; ++r)
          for (std::size_t q = 0; q < OW; ++q) {
            std::size_t best = (c * H + 2 * r) * W + 2 * q;
            for (std::size_t dy = 0; dy < 2; ++dy)
              for (std::size_t dx = 0; dx < 2; ++dx) {
                const std::size_t idx = (c * H + 2 * r + dy) * W + 2 * q + dx;
                if (input[idx] > input[best]) best = idx;
              }
            const std::size_t o = (c * OH + r) * OW + q;
            cache.output[o] = input[best];
            cache.argmax[o] = static_cast<std::uint32_t>(best);
          }
      break;
    }
    case LayerKind::dropout: {
      if (!train_mode || layer.keep_prob >= 1.0) {
        cache.output = input;
        break;
      }
      if (rng == nullptr) throw ArgumentError("layer '" + layer.name + "': dropout in train mode needs an rng");
      cache.output = Tensor(out_shape);
      cache.scale.resize(input.size());
      const double inv_keep = 1.0 / layer.keep_prob;
      for (std::size_t i = 0; i < input.size(); ++i) {
        cache.scale[i] = rng->uniform() < layer.keep_prob ? inv_keep : 0.0;
        cache.output[i] = input[i] * cache.scale[i];
      }
      break;
    }
    case LayerKind::flatten:
      cache.output = input.reshaped(out_shape);
      break;
    case LayerKind::softmax: {
      cache.output = Tensor(out_shape);
      const double m = *std::max_element(input.values().begin(), input.values().end());
      double z = 0.0;
      for (std::size_t i = 0; i < input.size(); ++i) {
        cache.output[i] = std::exp(input[i] - m);
        z += cache.output[i];
      }
      for (std::size_t i = 0; i < input.size(); ++i) cache.output[i] /= z;
      break;
    }
  }
  return cache;
}

/// Forward through a single layer.
inline Tensor layer_forward(const LayerSpec& layer, std::span<const Tensor> params, const Tensor& input,
                            bool train_mode, Rng* rng) {
  return std::move(layer_forward_cached(layer, params, input, train_mode, rng).output);
}

/// Backpropagates `grad_out` through one layer. Parameter gradients are
/// accumulated into `param_grads`; the input gradient is returned.
inline Tensor layer_backward(const LayerSpec& layer, std::span<const Tensor> params, const LayerCache& cache,
                             const Tensor& grad_out, std::span<Tensor> param_grads) {
  const Tensor& in = cache.input;
  switch (layer.kind) {
    case LayerKind::conv2d:
      return detail::conv2d_backward(layer, params[0], in, grad_out, param_grads[0], param_grads[1]);
    case LayerKind::linear: {
      Tensor gin(in.shape());
      const std::size_t n_in = layer.in_units;
      const double* w = params[0].data();
      double* gw = param_grads[0].data();
      for (std::size_t o = 0; o < layer.out_units; ++o) {
        const double g = grad_out[o];
        param_grads[1][o] += g;
        const double* row = w + o * n_in;
        double* grow = gw + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) {
          grow[i] += g * in[i];
          gin[i] += g * row[i];
        }
      }
      return gin;
    }
    case LayerKind::relu: {
      Tensor gin(in.shape());
      for (std::size_t i = 0; i < in.size(); ++i) gin[i] = in[i] > 0.0 ? grad_out[i] : 0.0;
      return gin;
    }
    case LayerKind::maxpool2: {
      Tensor gin(in.shape());
      for (std::size_t o = 0; o < grad_out.size(); ++o) gin[cache.argmax[o]] += grad_out[o];
      return gin;
    }
    case LayerKind::dropout: {
      if (cache.scale.empty()) return grad_out;
      Tensor gin(in.shape());
      for (std::size_t i = 0; i < in.size(); ++i) gin[i] = grad_out[i] * cache.scale[i];
      return gin;
    }
    case LayerKind::flatten:
      return grad_out.reshaped(in.shape());
    case LayerKind::softmax: {
      const Tensor& y = cache.output;
      double dot = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) dot += grad_out[i] * y[i];
      Tensor gin(in.shape());
      for (std::size_t i = 0; i < y.size(); ++i) gin[i] = y[i] * (grad_out[i] - dot);
      return gin;
    }
  }
  return grad_out;
}

}  // namespace actscore::nn
