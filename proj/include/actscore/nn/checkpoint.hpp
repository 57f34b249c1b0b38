#pragma once

#include <filesystem>

#include "actscore/binary_io.hpp"
#include "actscore/nn/model.hpp"

namespace actscore::nn {

// AMD1 checkpoint layout (little-endian):
//   "AMD1", u32 layer count,
//   per layer: u32 name length, name bytes, u32 kind tag, u32 tensor count,
//              per tensor: u32 ndim, ndim x u32 dims, f64 values.
// The kind tag carries the LayerKind code in its low byte and the capture
// flag in bit 8. Record 0 is a pseudo-layer named "input" (tag 0xff) holding
// one [3] tensor {C, H, W}; dropout layers hold one [1] tensor {keep_prob}.

inline constexpr std::uint32_t kInputTag = 0xff;
inline constexpr std::uint32_t kCaptureBit = 0x100;

inline io::Bytes encode_checkpoint(const Model& model) {
  validate_model(model);
  io::ByteWriter w;
  w.magic("AMD1");
  w.u32(model.layers.size() + 1, "layer count");
  w.string("input");
  w.u32(kInputTag);
  w.u32(1);
  w.tensor(Tensor({3}, {static_cast<double>(model.input_shape[0]), static_cast<double>(model.input_shape[1]),
                        static_cast<double>(model.input_shape[2])}));
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const LayerSpec& layer = model.layers[i];
    w.string(layer.name);
    w.u32(static_cast<std::uint32_t>(layer.kind) | (layer.capture ? kCaptureBit : 0u));
    if (layer.kind == LayerKind::dropout) {
      w.u32(1);
      w.tensor(Tensor({1}, {layer.keep_prob}));
      continue;
    }
    w.u32(model.params[i].size());
    for (const auto& t : model.params[i]) w.tensor(t);
  }
  return std::move(w).bytes();
}

inline Model decode_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "AMD1 checkpoint");
  r.expect_magic("AMD1");
  const std::uint32_t count = r.u32("layer count");
  if (count < 2) r.fail("checkpoint needs an input record and at least one layer");

  Model model;
  {
    const std::size_t at = r.offset();
    const std::string name = r.string("layer name");
    const std::uint32_t tag = r.u32("kind tag");
    const std::uint32_t tensors = r.u32("tensor count");
    if (name != "input" || tag != kInputTag || tensors != 1) r.fail_at(at, "first record must be the input shape");
    const Tensor shape = r.tensor();
    if (shape.shape() != Shape{3}) r.fail_at(at, "input shape record must be a [3] tensor");
    for (double v : shape.values()) {
      if (!(v >= 1.0) || v != std::floor(v) || v > 1e9) r.fail_at(at, "invalid input dimension");
      model.input_shape.push_back(static_cast<std::size_t>(v));
    }
  }

  for (std::uint32_t i = 1; i < count; ++i) {
    const std::size_t at = r.offset();
    LayerSpec layer;
    layer.name = r.string("layer name");
    const std::uint32_t tag = r.u32("kind tag");
    if ((tag & ~(kCaptureBit | 0xffu)) != 0 || (tag & 0xffu) > static_cast<std::uint32_t>(LayerKind::softmax))
      r.fail_at(at, "unknown kind tag " + std::to_string(tag));
    layer.kind = static_cast<LayerKind>(tag & 0xffu);
    layer.capture = (tag & kCaptureBit) != 0;
    const std::uint32_t tensors = r.u32("tensor count");
    std::vector<Tensor> params;
    for (std::uint32_t t = 0; t < tensors; ++t) params.push_back(r.tensor());

    auto expect_tensors = [&](std::size_t n) {
      if (params.size() != n)
        r.fail_at(at, "layer '" + layer.name + "' expects " + std::to_string(n) + " tensors, has " +
                          std::to_string(params.size()));
    };
    switch (layer.kind) {
      case LayerKind::conv2d:
        expect_tensors(2);
        if (params[0].ndim() != 4) r.fail_at(at, "conv2d weight must be 4-d");
        layer.out_channels = params[0].dim(0);
        layer.in_channels = params[0].dim(1);
        layer.kernel_h = params[0].dim(2);
        layer.kernel_w = params[0].dim(3);
        break;
      case LayerKind::linear:
        expect_tensors(2);
        if (params[0].ndim() != 2) r.fail_at(at, "linear weight must be 2-d");
        layer.out_units = params[0].dim(0);
        layer.in_units = params[0].dim(1);
        break;
      case LayerKind::dropout:
        expect_tensors(1);
        if (params[0].shape() != Shape{1}) r.fail_at(at, "dropout record must be a [1] tensor");
        layer.keep_prob = params[0][0];
        params.clear();
        break;
      default:
        expect_tensors(0);
    }
    model.layers.push_back(std::move(layer));
    model.params.push_back(std::move(params));
  }
  r.expect_end();
  try {
    validate_model(model);
  } catch (const Error& e) {
    throw FormatError(std::string("AMD1 checkpoint: ") + e.what());
  }
  return model;
}

inline void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  io::write_file(path, encode_checkpoint(model));
}

inline Model load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(io::read_file(path)); }

}  // namespace actscore::nn
