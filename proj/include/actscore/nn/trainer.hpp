#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "actscore/error.hpp"
#include "actscore/nn/adam.hpp"
#include "actscore/nn/model.hpp"
#include "actscore/rng.hpp"

namespace actscore::nn {

/// Images already converted to model input tensors, with class labels.
struct LabeledImages {
  std::vector<Tensor> images;
  std::vector<std::size_t> labels;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }
};

struct TrainOptions {
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
};

/// Overall accuracy plus per-class recall (NaN for classes with no samples).
struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> class_accuracy;
};

inline Evaluation evaluate(const Model& model, const LabeledImages& data) {
  const std::size_t classes = num_classes(model);
  Evaluation ev;
  ev.class_accuracy.assign(classes, std::numeric_limits<double>::quiet_NaN());
  if (data.empty()) return ev;
  const auto preds = predict_batch(model, data.images);
  std::vector<std::size_t> hit(classes, 0), total(classes, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t y = data.labels[i];
    total[y] += 1;
    if (preds[i].label == y) {
      hit[y] += 1;
      correct += 1;
    }
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(preds.size());
  for (std::size_t c = 0; c < classes; ++c)
    if (total[c] > 0) ev.class_accuracy[c] = static_cast<double>(hit[c]) / static_cast<double>(total[c]);
  return ev;
}

struct EpochMetrics {
  std::size_t epoch = 0;  // global epoch index of this trainer
  std::size_t train_size = 0;
  double train_loss = 0.0;
  std::optional<Evaluation> test;
};

/// Owns a model and its optimizer state across epochs. Batch order and
/// dropout masks are keyed by (seed, global epoch, batch), so a trainer
/// copied at some epoch and continued on the same data replays bit-exactly.
class Trainer {
 public:
  Trainer(Model model, TrainOptions options)
      : model_(std::move(model)), adam_(AdamState::for_params(model_.params, options.learning_rate)),
        options_(options) {
    validate_model(model_);
    if (options_.batch_size == 0) throw ArgumentError("batch size must be positive");
  }

  EpochMetrics train_epoch(const LabeledImages& data, const LabeledImages* test = nullptr) {
    if (data.empty()) throw ArgumentError("cannot train on an empty dataset");
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(derive_seed(options_.seed, {0x5f, epoch_}));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double loss_sum = 0.0;
    std::vector<Tensor> batch_images;
    std::vector<std::size_t> batch_labels;
    const std::size_t batches = (data.size() + options_.batch_size - 1) / options_.batch_size;
    for (std::size_t b = 0; b < batches; ++b) {
      batch_images.clear();
      batch_labels.clear();
      const std::size_t end = std::min(data.size(), (b + 1) * options_.batch_size);
      for (std::size_t k = b * options_.batch_size; k < end; ++k) {
        batch_images.push_back(data.images[order[k]]);
        batch_labels.push_back(data.labels[order[k]]);
      }
      const PassMode mode{.train = true, .dropout_key = derive_seed(options_.seed, {0xd0, epoch_, b})};
      auto lg = loss_and_grad(model_, batch_images, batch_labels, mode);
      adam_step(adam_, model_.params, lg.grads);
      loss_sum += lg.loss * static_cast<double>(batch_images.size());
    }
    EpochMetrics m;
    m.epoch = epoch_++;
    m.train_size = data.size();
    m.train_loss = loss_sum / static_cast<double>(data.size());
    if (test != nullptr) m.test = evaluate(model_, *test);
    return m;
  }

  /// Changes the step size for subsequent epochs; moments are kept.
  void set_learning_rate(double lr) {
    if (!(lr > 0.0)) throw ArgumentError("learning rate must be positive");
    adam_.learning_rate = lr;
  }

  const Model& model() const noexcept { return model_; }
  const AdamState& optimizer() const noexcept { return adam_; }
  std::size_t epochs_done() const noexcept { return epoch_; }
  const TrainOptions& options() const noexcept { return options_; }

 private:
  Model model_;
  AdamState adam_;
  TrainOptions options_;
  std::size_t epoch_ = 0;
};

struct FitResult {
  Model model;
  std::vector<EpochMetrics> metrics;
};

/// Trains a fresh optimizer for `epochs` passes over `train`.
inline FitResult fit(Model model, const LabeledImages& train, std::size_t epochs, const TrainOptions& options,
                     const LabeledImages* test = nullptr) {
  if (train.empty()) throw ArgumentError("fit: labeled dataset is empty");
  Trainer trainer(std::move(model), options);
  FitResult result;
  for (std::size_t e = 0; e < epochs; ++e) result.metrics.push_back(trainer.train_epoch(train, test));
  result.model = trainer.model();
  return result;
}

}  // namespace actscore::nn
