#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "actscore/tensor.hpp"

namespace actscore {

struct TraceEntry {
  std::string layer_name;
  Tensor activation;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

/// Ordered capture-point outputs of one image. All values are >= 0.
struct ActivationTrace {
  std::uint64_t image_id = 0;
  std::vector<TraceEntry> entries;

  friend bool operator==(const ActivationTrace&, const ActivationTrace&) = default;
};

}  // namespace actscore
