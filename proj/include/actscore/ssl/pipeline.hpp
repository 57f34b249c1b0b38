#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "actscore/data/dataset.hpp"
#include "actscore/error.hpp"
#include "actscore/nn/model.hpp"
#include "actscore/nn/trainer.hpp"
#include "actscore/parallel.hpp"
#include "actscore/scoring/profile.hpp"
#include "actscore/ssl/selection.hpp"

namespace actscore::ssl {

enum class SelectionMode { score, softmax };
enum class ProfileScope { per_class, global };

inline const char* mode_name(SelectionMode m) { return m == SelectionMode::score ? "score" : "softmax"; }
inline const char* scope_name(ProfileScope s) { return s == ProfileScope::per_class ? "per_class" : "global"; }

struct SelectionPolicy {
  SelectionMode mode = SelectionMode::score;
  std::vector<double> alpha;  // one fraction per class
  std::size_t update_interval_epochs = 1;
  ProfileScope profile_scope = ProfileScope::per_class;
};

/// Inputs of a semi-supervised run, converted to model tensors once.
/// `additional_truth` is read only when computing metrics.
struct SslData {
  nn::LabeledImages train;
  std::vector<std::uint64_t> train_ids;
  std::vector<Tensor> additional;
  std::vector<std::uint64_t> additional_ids;
  std::vector<std::size_t> additional_truth;
  nn::LabeledImages test;

  static SslData from(const data::Dataset& train, const data::Dataset& additional, const data::Dataset& test) {
    SslData d;
    d.train = data::labeled_images(train);
    d.train_ids = train.ids;
    d.additional = data::image_tensors(additional);
    d.additional_ids = additional.ids;
    d.additional_truth = additional.labels;
    d.test = data::labeled_images(test);
    return d;
  }
};

struct SelectionLogEntry {
  std::size_t epoch = 0;
  std::size_t class_id = 0;
  SelectionMode mode = SelectionMode::score;
  std::size_t pool_size = 0;
  std::size_t quota = 0;
  std::vector<std::uint64_t> selected_ids;
};

struct SslEpoch {
  nn::EpochMetrics metrics;
  std::size_t selected = 0;
  std::optional<std::size_t> selected_correct;  // when hidden truth is available
};

struct SslResult {
  nn::Model model;
  std::vector<nn::EpochMetrics> pretrain;
  std::vector<SslEpoch> epochs;
  std::vector<SelectionLogEntry> selections;
};

inline std::vector<ActivationTrace> traces_for(const nn::Model& model, std::span<const Tensor> images,
                                               std::span<const std::uint64_t> ids) {
  std::vector<ActivationTrace> out(images.size());
  parallel_for(images.size(), [&](std::size_t i) { out[i] = nn::forward_with_trace(model, images[i], ids[i]).trace; });
  return out;
}

/// Profile of class `class_id` (or of all images when empty) from the
/// model's traces of ground-truth-labeled images.
inline scoring::ClassActivationProfile labeled_profile(const nn::Model& model, const nn::LabeledImages& labeled,
                                                       std::span<const std::uint64_t> ids,
                                                       std::optional<std::size_t> class_id,
                                                       const scoring::ScoreConfig& config) {
  std::vector<Tensor> images;
  std::vector<std::uint64_t> picked;
  for (std::size_t i = 0; i < labeled.size(); ++i)
    if (!class_id || labeled.labels[i] == *class_id) {
      images.push_back(labeled.images[i]);
      picked.push_back(ids[i]);
    }
  if (images.empty())
    throw ArgumentError("no labeled images of class " + std::to_string(class_id.value_or(0)) + " to build a profile");
  const auto traces = traces_for(model, images, picked);
  return scoring::build_profile(traces, class_id, config);
}

inline void validate_policy(const SelectionPolicy& policy, std::size_t classes) {
  if (policy.alpha.size() != classes)
    throw ArgumentError("selection policy has " + std::to_string(policy.alpha.size()) + " alpha values for " +
                        std::to_string(classes) + " classes");
  for (double a : policy.alpha)
    if (!(a >= 0.0 && a <= 1.0)) throw ArgumentError("alpha values must be in [0, 1]");
  if (policy.update_interval_epochs == 0) throw ArgumentError("update interval must be a positive number of epochs");
}

struct SelectionRound {
  std::vector<SelectionLogEntry> log;
  nn::LabeledImages augmented;
  std::size_t selected = 0;
  std::optional<std::size_t> selected_correct;
};

/// One selection update: pseudo-label the additional set, rank each class
/// pool per policy, and return train set plus the chosen pseudo-labeled images.
inline SelectionRound select_round(const nn::Model& model, const SslData& data, const SelectionPolicy& policy,
                                   const scoring::ScoreConfig& score_config, std::size_t epoch) {
  const std::size_t classes = policy.alpha.size();
  const bool any = std::any_of(policy.alpha.begin(), policy.alpha.end(), [](double a) { return a > 0.0; });
  const bool by_score = policy.mode == SelectionMode::score && any;

  std::vector<PseudoLabel> pseudo;
  std::vector<ActivationTrace> traces;
  if (by_score) {
    pseudo.resize(data.additional.size());
    traces.resize(data.additional.size());
    parallel_for(data.additional.size(), [&](std::size_t i) {
      auto fr = nn::forward_with_trace(model, data.additional[i], data.additional_ids[i]);
      pseudo[i] = {data.additional_ids[i], nn::argmax(fr.probs.values()), std::move(fr.probs), std::nullopt};
      traces[i] = std::move(fr.trace);
    });
  } else if (any) {
    pseudo = pseudo_label(model, data.additional, data.additional_ids);
  }

  std::optional<scoring::ClassActivationProfile> global;
  if (by_score && policy.profile_scope == ProfileScope::global)
    global = labeled_profile(model, data.train, data.train_ids, std::nullopt, score_config);

  SelectionRound round;
  round.augmented = data.train;
  std::unordered_map<std::uint64_t, std::size_t> position;
  for (std::size_t i = 0; i < data.additional_ids.size(); ++i) position.emplace(data.additional_ids[i], i);
  const bool truth = data.additional_truth.size() == data.additional.size();
  std::size_t correct = 0;

  for (std::size_t c = 0; c < classes; ++c) {
    SelectionLogEntry entry;
    entry.epoch = epoch;
    entry.class_id = c;
    entry.mode = policy.mode;
    if (policy.alpha[c] > 0.0) {
      entry.pool_size = class_pool(pseudo, c).size();
      entry.quota = selection_quota(policy.alpha[c], entry.pool_size);
      if (entry.pool_size == 0) {
        // nothing predicted as this class
      } else if (policy.mode == SelectionMode::softmax) {
        entry.selected_ids = select_by_softmax(pseudo, c, policy.alpha[c]);
      } else {
        const auto profile = global ? *global : labeled_profile(model, data.train, data.train_ids, c, score_config);
        std::vector<scoring::ScoreRecord> scores;
        for (std::size_t i = 0; i < pseudo.size(); ++i)
          if (pseudo[i].predicted_class == c) {
            scores.push_back(scoring::score_image(traces[i], profile));
            pseudo[i].score = scores.back().score;
          }
        entry.selected_ids = select_by_score(pseudo, scores, c, policy.alpha[c]);
      }
    }
    for (auto id : entry.selected_ids) {
      const std::size_t i = position.at(id);
      round.augmented.images.push_back(data.additional[i]);
      round.augmented.labels.push_back(c);
      if (truth && data.additional_truth[i] == c) ++correct;
    }
    round.selected += entry.selected_ids.size();
    round.log.push_back(std::move(entry));
  }
  if (truth) round.selected_correct = correct;
  return round;
}

/// Semi-supervised phase from an already trained state. Every
/// `update_interval_epochs` the selection is recomputed with the current
/// model and replaces the previous one; the original train set is always
/// kept in full.
inline SslResult ssl_continue(nn::Trainer trainer, const SslData& data, const SelectionPolicy& policy,
                              std::size_t ssl_epochs, const scoring::ScoreConfig& score_config = {}) {
  validate_policy(policy, nn::num_classes(trainer.model()));
  SslResult result;
  SelectionRound round;
  for (std::size_t e = 0; e < ssl_epochs; ++e) {
    if (e % policy.update_interval_epochs == 0) {
      round = select_round(trainer.model(), data, policy, score_config, trainer.epochs_done());
      result.selections.insert(result.selections.end(), round.log.begin(), round.log.end());
    }
    SslEpoch ep;
    ep.metrics = trainer.train_epoch(round.augmented, data.test.empty() ? nullptr : &data.test);
    ep.selected = round.selected;
    ep.selected_correct = round.selected_correct;
    result.epochs.push_back(std::move(ep));
  }
  result.model = trainer.model();
  return result;
}

/// Pretrain on the labeled split, then run the semi-supervised phase.
inline SslResult ssl_run(const SslData& data, nn::Model model, const SelectionPolicy& policy,
                         std::size_t pretrain_epochs, std::size_t ssl_epochs, const nn::TrainOptions& options,
                         const scoring::ScoreConfig& score_config = {}) {
  validate_policy(policy, nn::num_classes(model));
  nn::Trainer trainer(std::move(model), options);
  std::vector<nn::EpochMetrics> pre;
  for (std::size_t e = 0; e < pretrain_epochs; ++e)
    pre.push_back(trainer.train_epoch(data.train, data.test.empty() ? nullptr : &data.test));
  auto result = ssl_continue(std::move(trainer), data, policy, ssl_epochs, score_config);
  result.pretrain = std::move(pre);
  return result;
}

/// Model retrained to favour one class, with that class's profile.
struct Specialist {
  std::size_t class_id = 0;
  nn::Model model;
  scoring::ClassActivationProfile profile;
};

struct Ensemble {
  std::vector<Specialist> members;
};

/// Each specialist k labels every image; an image it labels as k is claimed
/// with its score under profile k. The highest-scoring claim wins (ties to
/// the lower class). Unclaimed images take the class with the highest
/// softmax probability over all specialists.
inline std::vector<std::size_t> assemble(const Ensemble& ensemble, std::span<const Tensor> images) {
  if (ensemble.members.empty()) throw ArgumentError("assemble: empty ensemble");
  const std::size_t classes = nn::num_classes(ensemble.members.front().model);
  std::vector<const Specialist*> by_class(classes, nullptr);
  for (const auto& m : ensemble.members) {
    if (m.class_id >= classes) throw ArgumentError("specialist class " + std::to_string(m.class_id) + " out of range");
    if (by_class[m.class_id] != nullptr)
      throw ArgumentError("two specialists for class " + std::to_string(m.class_id));
    if (m.profile.layers.empty() || m.profile.class_id != m.class_id)
      throw ArgumentError("specialist for class " + std::to_string(m.class_id) + " has no matching profile");
    by_class[m.class_id] = &m;
  }
  for (std::size_t c = 0; c < classes; ++c)
    if (by_class[c] == nullptr) throw ArgumentError("ensemble has no specialist for class " + std::to_string(c));

  std::vector<std::size_t> out(images.size());
  parallel_for(images.size(), [&](std::size_t i) {
    std::optional<std::size_t> claimant;
    double best_score = 0.0;
    std::size_t fallback = 0;
    double fallback_prob = -1.0;
    for (std::size_t k = 0; k < classes; ++k) {
      const Specialist& s = *by_class[k];
      const auto fr = nn::forward_with_trace(s.model, images[i], i);
      const std::size_t label = nn::argmax(fr.probs.values());
      for (std::size_t j = 0; j < fr.probs.size(); ++j)
        if (fr.probs[j] > fallback_prob || (fr.probs[j] == fallback_prob && j < fallback)) {
          fallback_prob = fr.probs[j];
          fallback = j;
        }
      if (label != k) continue;
      const double score = scoring::score_image(fr.trace, s.profile).score;
      if (!claimant || score > best_score) {
        claimant = k;
        best_score = score;
      }
    }
    out[i] = claimant.value_or(fallback);
  });
  return out;
}

}  // namespace actscore::ssl
