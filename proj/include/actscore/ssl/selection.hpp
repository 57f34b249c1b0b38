#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "actscore/error.hpp"
#include "actscore/nn/model.hpp"
#include "actscore/scoring/profile.hpp"

namespace actscore::ssl {

struct PseudoLabel {
  std::uint64_t image_id = 0;
  std::size_t predicted_class = 0;
  Tensor softmax;
  std::optional<double> score;

  double confidence() const { return softmax[predicted_class]; }
};

/// Labels every image with the model's argmax class.
inline std::vector<PseudoLabel> pseudo_label(const nn::Model& model, std::span<const Tensor> images,
                                             std::span<const std::uint64_t> ids) {
  if (images.size() != ids.size())
    throw ArgumentError("pseudo_label: " + std::to_string(images.size()) + " images but " +
                        std::to_string(ids.size()) + " ids");
  auto preds = nn::predict_batch(model, images);
  std::vector<PseudoLabel> out;
  out.reserve(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i)
    out.push_back({ids[i], preds[i].label, std::move(preds[i].probs), std::nullopt});
  return out;
}

/// floor(alpha * pool_size), guarded against representation error such as
/// 0.29 * 100 = 28.999...
inline std::size_t selection_quota(double alpha, std::size_t pool_size) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ArgumentError("alpha must be in [0, 1], got " + std::to_string(alpha));
  return std::min(pool_size,
                  static_cast<std::size_t>(std::floor(alpha * static_cast<double>(pool_size) + 1e-9)));
}

inline std::vector<const PseudoLabel*> class_pool(std::span<const PseudoLabel> pseudo, std::size_t class_c) {
  std::vector<const PseudoLabel*> pool;
  for (const auto& p : pseudo)
    if (p.predicted_class == class_c) pool.push_back(&p);
  return pool;
}

/// Highest max-softmax first, ties by ascending id. `pool_size` defaults to
/// the number of images pseudo-labeled as class_c.
inline std::vector<std::uint64_t> select_by_softmax(std::span<const PseudoLabel> pseudo, std::size_t class_c,
                                                    double alpha_c, std::optional<std::size_t> pool_size = {}) {
  auto pool = class_pool(pseudo, class_c);
  const std::size_t quota = std::min(selection_quota(alpha_c, pool_size.value_or(pool.size())), pool.size());
  std::stable_sort(pool.begin(), pool.end(), [](const PseudoLabel* a, const PseudoLabel* b) {
    if (a->confidence() != b->confidence()) return a->confidence() > b->confidence();
    return a->image_id < b->image_id;
  });
  std::vector<std::uint64_t> ids;
  for (std::size_t i = 0; i < quota; ++i) ids.push_back(pool[i]->image_id);
  return ids;
}

/// Highest image score first, ties by ascending id. Images scored kNegInf are
/// never selected; the quota shrinks instead.
inline std::vector<std::uint64_t> select_by_score(std::span<const PseudoLabel> pseudo,
                                                  std::span<const scoring::ScoreRecord> scores, std::size_t class_c,
                                                  double alpha_c, std::optional<std::size_t> pool_size = {}) {
  std::unordered_map<std::uint64_t, double> by_id;
  for (const auto& s : scores) by_id.emplace(s.image_id, s.score);
  const auto pool = class_pool(pseudo, class_c);
  const std::size_t quota = std::min(selection_quota(alpha_c, pool_size.value_or(pool.size())), pool.size());

  std::vector<std::pair<double, std::uint64_t>> ranked;
  for (const auto* p : pool) {
    auto it = by_id.find(p->image_id);
    if (it == by_id.end())
      throw ArgumentError("select_by_score: no score record for image " + std::to_string(p->image_id));
    if (it->second != scoring::kNegInf) ranked.emplace_back(it->second, p->image_id);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::vector<std::uint64_t> ids;
  for (std::size_t i = 0; i < std::min(quota, ranked.size()); ++i) ids.push_back(ranked[i].second);
  return ids;
}

}  // namespace actscore::ssl
