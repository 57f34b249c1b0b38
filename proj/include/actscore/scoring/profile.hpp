#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actscore/error.hpp"
#include "actscore/parallel.hpp"
#include "actscore/tensor.hpp"
#include "actscore/trace.hpp"

namespace actscore::scoring {

/// Score of an image that activates none of some layer's profiled neurons.
/// Sorts below every finite score; serialized as "-inf".
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

enum class Norm { max, l1, l2 };

/// Scale of the per-image threshold. `sum` compares an image's activations
/// against norm(X)/divisor where X sums the activations of all contributing
/// images; `mean` divides that threshold by the number of contributors, so a
/// single image is compared at the scale of one average image. Both give the
/// same profile mask.
enum class ThresholdBasis { sum, mean };

struct ScoreConfig {
  Norm norm = Norm::max;
  double divisor = 2.0;
  ThresholdBasis basis = ThresholdBasis::sum;
};

struct LayerProfile {
  std::string layer_name;
  Tensor summed;                 // elementwise sum over contributors
  double threshold = 0.0;        // norm(summed) / divisor
  double image_threshold = 0.0;  // threshold applied to single images
  Tensor mask;                   // 1 where summed >= threshold, else 0
  std::size_t mask_count = 0;
};

/// The "correct" activation profile of one class, or of the whole set when
/// `class_id` is empty.
struct ClassActivationProfile {
  std::optional<std::size_t> class_id;
  std::vector<LayerProfile> layers;
  std::size_t contributing_count = 0;
  ScoreConfig config;
};

struct ScoreRecord {
  std::uint64_t image_id = 0;
  std::vector<double> ratios;
  double score = 0.0;

  bool neg_inf() const noexcept { return score == kNegInf; }
};

inline double layer_norm(const Tensor& x, Norm norm) {
  switch (norm) {
    case Norm::max: {
      double m = 0.0;
      for (double v : x.values()) m = std::max(m, v);
      return m;
    }
    case Norm::l1: {
      double s = 0.0;
      for (double v : x.values()) s += std::abs(v);
      return s;
    }
    case Norm::l2: {
      double s = 0.0;
      for (double v : x.values()) s += v * v;
      return std::sqrt(s);
    }
  }
  return 0.0;
}

namespace detail {

inline void check_same_structure(const ActivationTrace& ref, const ActivationTrace& t) {
  if (t.entries.size() != ref.entries.size())
    throw ShapeError("trace of image " + std::to_string(t.image_id) + " has " + std::to_string(t.entries.size()) +
                     " layers, expected " + std::to_string(ref.entries.size()));
  for (std::size_t l = 0; l < ref.entries.size(); ++l) {
    const auto& a = ref.entries[l];
    const auto& b = t.entries[l];
    if (a.layer_name != b.layer_name || a.activation.shape() != b.activation.shape())
      throw ShapeError("layer '" + b.layer_name + "' " + shape_str(b.activation.shape()) + " of image " +
                       std::to_string(t.image_id) + " does not match layer '" + a.layer_name + "' " +
                       shape_str(a.activation.shape()));
  }
}

inline void check_profile_structure(const ActivationTrace& t, const ClassActivationProfile& p) {
  if (t.entries.size() != p.layers.size())
    throw ShapeError("trace of image " + std::to_string(t.image_id) + " has " + std::to_string(t.entries.size()) +
                     " layers, profile has " + std::to_string(p.layers.size()));
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const auto& e = t.entries[l];
    if (e.layer_name != p.layers[l].layer_name || e.activation.shape() != p.layers[l].summed.shape())
      throw ShapeError("layer '" + e.layer_name + "' " + shape_str(e.activation.shape()) +
                       " does not match profile layer '" + p.layers[l].layer_name + "' " +
                       shape_str(p.layers[l].summed.shape()));
  }
}

/// Canonical order: image id, then activation contents. Summing in this order
/// makes the profile independent of the order traces were supplied in.
inline bool canonical_less(const ActivationTrace& a, const ActivationTrace& b) {
  if (a.image_id != b.image_id) return a.image_id < b.image_id;
  for (std::size_t l = 0; l < a.entries.size(); ++l) {
    const auto& x = a.entries[l].activation.vec();
    const auto& y = b.entries[l].activation.vec();
    if (x != y) return std::lexicographical_compare(x.begin(), x.end(), y.begin(), y.end());
  }
  return false;
}

}  // namespace detail

/// Sums the traces per layer, then thresholds each layer sum at
/// norm(X)/divisor to get the profile mask.
inline ClassActivationProfile build_profile(std::span<const ActivationTrace> traces, std::optional<std::size_t> class_id,
                                            const ScoreConfig& config = {}) {
  if (traces.empty()) throw ArgumentError("build_profile: no traces");
  if (!(config.divisor > 0.0) || !std::isfinite(config.divisor))
    throw ArgumentError("build_profile: divisor must be positive");
  const ActivationTrace& ref = traces.front();
  for (const auto& t : traces) {
    detail::check_same_structure(ref, t);
    for (const auto& e : t.entries)
      if (!e.activation.all_nonnegative())
        throw ArgumentError("layer '" + e.layer_name + "' of image " + std::to_string(t.image_id) +
                            " has negative activations");
  }

  std::vector<std::size_t> order(traces.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return detail::canonical_less(traces[a], traces[b]); });

  ClassActivationProfile profile;
  profile.class_id = class_id;
  profile.contributing_count = traces.size();
  profile.config = config;
  for (std::size_t l = 0; l < ref.entries.size(); ++l) {
    LayerProfile lp;
    lp.layer_name = ref.entries[l].layer_name;
    lp.summed = Tensor::zeros(ref.entries[l].activation.shape());
    for (auto idx : order) {
      const auto& x = traces[idx].entries[l].activation;
      for (std::size_t i = 0; i < x.size(); ++i) lp.summed[i] += x[i];
    }
    lp.threshold = layer_norm(lp.summed, config.norm) / config.divisor;
    lp.image_threshold = config.basis == ThresholdBasis::mean
                             ? lp.threshold / static_cast<double>(traces.size())
                             : lp.threshold;
    lp.mask = Tensor::zeros(lp.summed.shape());
    for (std::size_t i = 0; i < lp.summed.size(); ++i) {
      if (lp.summed[i] >= lp.threshold) {
        lp.mask[i] = 1.0;
        ++lp.mask_count;
      }
    }
    profile.layers.push_back(std::move(lp));
  }
  return profile;
}

/// Per-layer binary masks of one image: 1 where its activation reaches the
/// profile's image threshold.
inline std::vector<Tensor> image_masks(const ActivationTrace& trace, const ClassActivationProfile& profile) {
  detail::check_profile_structure(trace, profile);
  std::vector<Tensor> masks;
  for (std::size_t l = 0; l < profile.layers.size(); ++l) {
    const auto& x = trace.entries[l].activation;
    Tensor m = Tensor::zeros(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) m[i] = x[i] >= profile.layers[l].image_threshold ? 1.0 : 0.0;
    masks.push_back(std::move(m));
  }
  return masks;
}

/// ratio_l = |image mask_l| / |profile mask_l|; score = sum_l ln(ratio_l),
/// or kNegInf when any ratio is zero.
inline ScoreRecord score_image(const ActivationTrace& trace, const ClassActivationProfile& profile) {
  detail::check_profile_structure(trace, profile);
  ScoreRecord rec;
  rec.image_id = trace.image_id;
  bool zero = false;
  for (std::size_t l = 0; l < profile.layers.size(); ++l) {
    const LayerProfile& lp = profile.layers[l];
    if (lp.mask_count == 0)
      throw ArgumentError("profile layer '" + lp.layer_name + "' has an empty mask; cannot score");
    std::size_t hits = 0;
    for (double v : trace.entries[l].activation.values())
      if (v >= lp.image_threshold) ++hits;
    const double r = static_cast<double>(hits) / static_cast<double>(lp.mask_count);
    rec.ratios.push_back(r);
    if (hits == 0) zero = true;
  }
  if (zero) {
    rec.score = kNegInf;
  } else {
    double s = 0.0;
    for (double r : rec.ratios) s += std::log(r);
    rec.score = s;
  }
  return rec;
}

/// Descending score, ties by ascending image id; kNegInf records come last.
inline void sort_records(std::vector<ScoreRecord>& records) {
  std::stable_sort(records.begin(), records.end(), [](const ScoreRecord& a, const ScoreRecord& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.image_id < b.image_id;
  });
}

inline std::vector<ScoreRecord> score_batch(std::span<const ActivationTrace> traces,
                                            const ClassActivationProfile& profile) {
  std::vector<ScoreRecord> out(traces.size());
  parallel_for(traces.size(), [&](std::size_t i) { out[i] = score_image(traces[i], profile); });
  sort_records(out);
  return out;
}

/// Six decimals, or "-inf" for the sentinel.
inline std::string format_score(double score) {
  if (score == kNegInf) return "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", score);
  return buf;
}

struct ScoredImage {
  std::uint64_t image_id = 0;
  std::size_t predicted_class = 0;
  double score = 0.0;
};

/// Score report CSV: image_id,predicted_class,score
inline std::string score_csv(std::span<const ScoredImage> rows) {
  std::string out = "image_id,predicted_class,score\n";
  for (const auto& r : rows)
    out += std::to_string(r.image_id) + "," + std::to_string(r.predicted_class) + "," + format_score(r.score) + "\n";
  return out;
}

}  // namespace actscore::scoring
