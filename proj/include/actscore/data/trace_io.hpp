#pragma once

#include <cmath>
#include <filesystem>

#include "actscore/binary_io.hpp"
#include "actscore/trace.hpp"

namespace actscore::data {

// ATR1 layout (little-endian): "ATR1", u32 image_id, u32 num_layers,
// per layer: u32 name length, name bytes, u32 ndim, ndim x u32 dims,
// f64 values. Values must be finite and >= 0.

inline io::Bytes encode_trace(const ActivationTrace& trace) {
  io::ByteWriter w;
  w.magic("ATR1");
  w.u32(trace.image_id, "image_id");
  w.u32(trace.entries.size(), "layer count");
  for (const auto& e : trace.entries) {
    if (!e.activation.all_nonnegative() || !e.activation.all_finite())
      throw ArgumentError("trace layer '" + e.layer_name + "' has negative or non-finite activations");
    w.string(e.layer_name);
    w.tensor(e.activation);
  }
  return std::move(w).bytes();
}

inline ActivationTrace decode_trace(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "ATR1 trace");
  r.expect_magic("ATR1");
  ActivationTrace trace;
  trace.image_id = r.u32("image_id");
  const std::uint32_t layers = r.u32("layer count");
  for (std::uint32_t l = 0; l < layers; ++l) {
    TraceEntry e;
    e.layer_name = r.string("layer name");
    e.activation = r.tensor([&](double v, std::size_t at) {
      if (!(v >= 0.0) || !std::isfinite(v))
        r.fail_at(at, "activation " + std::to_string(v) + " in layer '" + e.layer_name + "' is not a finite value >= 0");
    });
    trace.entries.push_back(std::move(e));
  }
  r.expect_end();
  return trace;
}

inline void write_trace(const ActivationTrace& trace, const std::filesystem::path& path) {
  io::write_file(path, encode_trace(trace));
}

inline ActivationTrace read_trace(const std::filesystem::path& path) { return decode_trace(io::read_file(path)); }

}  // namespace actscore::data
