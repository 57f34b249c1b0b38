#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "actscore/binary_io.hpp"
#include "actscore/error.hpp"
#include "actscore/nn/trainer.hpp"
#include "actscore/rng.hpp"
#include "actscore/tensor.hpp"

namespace actscore::data {

inline constexpr std::uint8_t kUnlabeled = 255;

/// A set of equally shaped u8 images (channel-major, row-major).
/// `labels` is either empty (unlabeled) or holds one class per image.
/// `ids` identify images across splits; loading a file numbers them 0..n-1.
struct Dataset {
  std::size_t channels = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t num_classes = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::size_t> labels;
  std::vector<std::uint64_t> ids;

  std::size_t image_size() const noexcept { return channels * height * width; }
  std::size_t size() const noexcept { return ids.size(); }
  bool labeled() const noexcept { return labels.size() == ids.size(); }

  std::span<const std::uint8_t> image(std::size_t i) const {
    return std::span(pixels).subspan(i * image_size(), image_size());
  }

  Shape image_shape() const { return {channels, height, width}; }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline void validate(const Dataset& ds) {
  if (ds.channels == 0 || ds.height == 0 || ds.width == 0) throw ArgumentError("dataset image dimensions must be positive");
  if (ds.pixels.size() != ds.size() * ds.image_size())
    throw ArgumentError("dataset pixel buffer holds " + std::to_string(ds.pixels.size()) + " bytes, expected " +
                        std::to_string(ds.size() * ds.image_size()));
  if (!ds.labels.empty() && ds.labels.size() != ds.size())
    throw ArgumentError("dataset has " + std::to_string(ds.labels.size()) + " labels for " +
                        std::to_string(ds.size()) + " images");
  for (std::size_t i = 0; i < ds.labels.size(); ++i)
    if (ds.labels[i] >= ds.num_classes)
      throw ArgumentError("label " + std::to_string(ds.labels[i]) + " of image " + std::to_string(i) +
                          " outside [0, " + std::to_string(ds.num_classes) + ")");
}

/// Pixel values scaled to [0, 1].
inline Tensor image_tensor(const Dataset& ds, std::size_t i) {
  const auto px = ds.image(i);
  std::vector<double> v(px.size());
  for (std::size_t k = 0; k < px.size(); ++k) v[k] = static_cast<double>(px[k]) / 255.0;
  return Tensor(ds.image_shape(), std::move(v));
}

inline std::vector<Tensor> image_tensors(const Dataset& ds) {
  std::vector<Tensor> out;
  out.reserve(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i) out.push_back(image_tensor(ds, i));
  return out;
}

inline nn::LabeledImages labeled_images(const Dataset& ds) {
  if (ds.size() != 0 && !ds.labeled()) throw ArgumentError("dataset is unlabeled");
  return {image_tensors(ds), ds.labels};
}

/// Subset by position, keeping ids and labels.
inline Dataset subset(const Dataset& ds, std::span<const std::size_t> positions) {
  Dataset out{ds.channels, ds.height, ds.width, ds.num_classes, {}, {}, {}};
  out.pixels.reserve(positions.size() * ds.image_size());
  for (auto p : positions) {
    const auto img = ds.image(p);
    out.pixels.insert(out.pixels.end(), img.begin(), img.end());
    out.ids.push_back(ds.ids[p]);
    if (ds.labeled()) out.labels.push_back(ds.labels[p]);
  }
  return out;
}

/// Oriented-stripe images: class k has stripes at angle k*180/num_classes
/// degrees. noise_level in [0, 1] blends in uniform pixel noise and jitters
/// the stripe phase; at 0 every image of a class is identical. Images are
/// ordered class by class.
inline Dataset generate_synthetic(std::size_t num_classes, std::size_t per_class, std::size_t height,
                                  std::size_t width, double noise_level, std::uint64_t seed) {
  if (num_classes < 2 || num_classes > 16) throw ArgumentError("num_classes must be in [2, 16]");
  if (per_class < 1) throw ArgumentError("per_class must be at least 1");
  if (height < 1 || width < 1) throw ArgumentError("image height and width must be positive");
  if (!(noise_level >= 0.0 && noise_level <= 1.0)) throw ArgumentError("noise_level must be in [0, 1]");

  Dataset ds{1, height, width, num_classes, {}, {}, {}};
  ds.pixels.reserve(num_classes * per_class * height * width);
  const double period = std::max(2.0, static_cast<double>(std::min(height, width)) / 4.0);
  for (std::size_t k = 0; k < num_classes; ++k) {
    const double angle = static_cast<double>(k) * std::numbers::pi / static_cast<double>(num_classes);
    const double ca = std::cos(angle), sa = std::sin(angle);
    for (std::size_t j = 0; j < per_class; ++j) {
      const std::uint64_t id = k * per_class + j;
      Rng rng(derive_seed(seed, {0x9e11, id}));
      const double phase = noise_level * 2.0 * std::numbers::pi * rng.uniform();
      for (std::size_t y = 0; y < height; ++y)
        for (std::size_t x = 0; x < width; ++x) {
          const double proj = static_cast<double>(x) * ca + static_cast<double>(y) * sa;
          const double stripe = 0.5 + 0.5 * std::cos(2.0 * std::numbers::pi * proj / period + phase);
          const double v = (1.0 - noise_level) * stripe + noise_level * rng.uniform();
          ds.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
        }
      ds.labels.push_back(k);
      ds.ids.push_back(id);
    }
  }
  return ds;
}

struct SplitSpec {
  double train = 0.6;
  double additional = 0.4;
  double test = 0.0;
  std::uint64_t seed = 0;
};

struct Splits {
  Dataset train;
  Dataset additional;  // labels kept only as hidden ground truth for metrics
  Dataset test;
};

/// Shuffles by seed and cuts floor(fraction * N) images for the additional
/// and test splits. The training split gets floor((sum of fractions) * N)
/// minus those, i.e. its own share plus any rounding leftover; images beyond
/// the requested total stay unassigned.
inline Splits split_dataset(const Dataset& ds, const SplitSpec& spec) {
  validate(ds);
  if (!ds.labeled()) throw ArgumentError("split_dataset needs a labeled dataset");
  for (double f : {spec.train, spec.additional, spec.test})
    if (!(f >= 0.0 && f <= 1.0)) throw ArgumentError("split fractions must be in [0, 1]");
  const double total = spec.train + spec.additional + spec.test;
  if (total > 1.0 + 1e-12) throw ArgumentError("split fractions sum to " + std::to_string(total) + " > 1");

  const std::size_t n = ds.size();
  auto cut = [n](double f) {
    return std::min(n, static_cast<std::size_t>(std::floor(f * static_cast<double>(n) + 1e-9)));
  };
  const std::size_t n_add = cut(spec.additional);
  const std::size_t n_test = cut(spec.test);
  const std::size_t n_assigned = std::max(cut(std::min(total, 1.0)), n_add + n_test);
  const std::size_t n_train = n_assigned - n_add - n_test;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(spec.seed, {0x5b1d}));
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);

  const std::span<const std::size_t> all(order);
  return {subset(ds, all.subspan(0, n_train)), subset(ds, all.subspan(n_train, n_add)),
          subset(ds, all.subspan(n_train + n_add, n_test))};
}

// TDS1 layout (little-endian): "TDS1", u32 num_images, channels, height,
// width, num_classes, then pixel bytes image by image, then one u8 label per
// image (255 = unlabeled).

inline io::Bytes encode_dataset(const Dataset& ds) {
  validate(ds);
  if (ds.num_classes >= kUnlabeled) throw ArgumentError("TDS1 supports at most 254 classes");
  io::ByteWriter w;
  w.magic("TDS1");
  w.u32(ds.size(), "num_images");
  w.u32(ds.channels, "channels");
  w.u32(ds.height, "height");
  w.u32(ds.width, "width");
  w.u32(ds.num_classes, "num_classes");
  w.raw(ds.pixels);
  for (std::size_t i = 0; i < ds.size(); ++i)
    w.u8(ds.labeled() ? static_cast<std::uint8_t>(ds.labels[i]) : kUnlabeled);
  return std::move(w).bytes();
}

inline Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "TDS1 dataset");
  r.expect_magic("TDS1");
  Dataset ds;
  const std::size_t n = r.u32("num_images");
  const std::size_t dims_at = r.offset();
  ds.channels = r.u32("channels");
  ds.height = r.u32("height");
  ds.width = r.u32("width");
  ds.num_classes = r.u32("num_classes");
  if (ds.channels == 0 || ds.height == 0 || ds.width == 0) r.fail_at(dims_at, "image dimensions must be positive");
  if (ds.num_classes >= kUnlabeled) r.fail_at(dims_at, "num_classes must be below 255");
  if (n != 0 && ds.image_size() > r.remaining() / n) r.fail("truncated file: pixel data shorter than header declares");
  const auto px = r.raw(n * ds.image_size(), "pixel data");
  ds.pixels.assign(px.begin(), px.end());
  const std::size_t labels_at = r.offset();
  const auto raw_labels = r.raw(n, "labels");
  std::size_t unlabeled = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint8_t y = raw_labels[i];
    if (y == kUnlabeled) {
      ++unlabeled;
      continue;
    }
    if (y >= ds.num_classes)
      r.fail_at(labels_at + i, "label " + std::to_string(y) + " outside [0, " + std::to_string(ds.num_classes) + ")");
    ds.labels.push_back(y);
  }
  if (unlabeled != 0 && unlabeled != n) r.fail_at(labels_at, "mixture of labeled and unlabeled images");
  r.expect_end();
  ds.ids.resize(n);
  std::iota(ds.ids.begin(), ds.ids.end(), std::uint64_t{0});
  return ds;
}

inline void save_dataset(const Dataset& ds, const std::filesystem::path& path) {
  io::write_file(path, encode_dataset(ds));
}

inline Dataset load_dataset(const std::filesystem::path& path) { return decode_dataset(io::read_file(path)); }

}  // namespace actscore::data
