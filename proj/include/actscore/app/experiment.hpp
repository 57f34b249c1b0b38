#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "actscore/data/dataset.hpp"
#include "actscore/nn/model.hpp"
#include "actscore/nn/trainer.hpp"
#include "actscore/scoring/profile.hpp"
#include "actscore/ssl/pipeline.hpp"
#include "actscore/stats/bootstrap.hpp"

namespace actscore::app {

/// Everything the class-by-class comparison needs besides the data.
struct ExperimentSettings {
  nn::DefaultArchitecture arch;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  std::optional<double> ssl_learning_rate;  // step size after pretraining; default learning_rate
  std::size_t pretrain_epochs = 8;
  std::size_t ssl_epochs = 8;
  std::vector<double> alpha;  // per class
  std::size_t update_interval = 1;
  ssl::ProfileScope scope = ssl::ProfileScope::per_class;
  scoring::ScoreConfig score;
  std::size_t bootstrap_resamples = 10000;
  std::size_t last_k = 50;  // bootstrap samples: per-epoch accuracies of the last K epochs
};

struct RegimeRun {
  std::vector<ssl::SslEpoch> epochs;
  std::vector<ssl::SelectionLogEntry> selections;
  nn::Model model;
};

/// One seed of the comparison: a shared pretrained state, plain continued
/// training as baseline, and for every class c one specialist fine-tuned with
/// score-ranked and one with softmax-ranked pseudo-labels of class c only.
struct ClassComparison {
  std::uint64_t seed = 0;
  std::vector<nn::EpochMetrics> pretrain;
  RegimeRun baseline;
  std::vector<RegimeRun> score_specialists;
  std::vector<RegimeRun> softmax_specialists;
  std::vector<stats::SignificanceRow> rows;
};

/// Class-c test accuracy over the last `k` epochs of a run.
inline std::vector<double> tail_class_accuracy(const RegimeRun& run, std::size_t c, std::size_t k) {
  std::vector<double> out;
  const std::size_t n = run.epochs.size();
  for (std::size_t e = n - std::min(n, k); e < n; ++e) out.push_back(run.epochs[e].metrics.test->class_accuracy[c]);
  return out;
}

inline double tail_mean(const std::vector<double>& v) { return stats::mean(v); }

inline ClassComparison run_class_comparison(const ssl::SslData& data, std::size_t classes,
                                            const ExperimentSettings& settings, std::uint64_t seed) {
  if (data.test.empty()) throw ArgumentError("the comparison needs a labeled test split");
  if (settings.ssl_epochs == 0) throw ArgumentError("the comparison needs at least one semi-supervised epoch");
  const Shape input = data.train.images.front().shape();
  const nn::TrainOptions options{settings.batch_size, settings.learning_rate, seed};

  ClassComparison ex;
  ex.seed = seed;
  nn::Trainer pretrained(nn::make_default_model(input, classes, seed, settings.arch), options);
  for (std::size_t e = 0; e < settings.pretrain_epochs; ++e)
    ex.pretrain.push_back(pretrained.train_epoch(data.train, &data.test));
  if (settings.ssl_learning_rate) pretrained.set_learning_rate(*settings.ssl_learning_rate);

  auto run = [&](ssl::SelectionMode mode, std::vector<double> alpha) {
    const ssl::SelectionPolicy policy{mode, std::move(alpha), settings.update_interval, settings.scope};
    auto r = ssl::ssl_continue(pretrained, data, policy, settings.ssl_epochs, settings.score);
    return RegimeRun{std::move(r.epochs), std::move(r.selections), std::move(r.model)};
  };

  ex.baseline = run(ssl::SelectionMode::score, std::vector<double>(classes, 0.0));
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> alpha(classes, 0.0);
    alpha[c] = settings.alpha.at(c);
    ex.score_specialists.push_back(run(ssl::SelectionMode::score, alpha));
    ex.softmax_specialists.push_back(run(ssl::SelectionMode::softmax, alpha));
  }
  for (std::size_t c = 0; c < classes; ++c) {
    const auto base = tail_class_accuracy(ex.baseline, c, settings.last_k);
    const auto train = tail_class_accuracy(ex.score_specialists[c], c, settings.last_k);
    const auto soft = tail_class_accuracy(ex.softmax_specialists[c], c, settings.last_k);
    ex.rows.push_back(stats::significance_row(c, base, train, soft, settings.bootstrap_resamples, seed));
  }
  return ex;
}

/// Score-mode specialists with their class profiles from the labeled split.
inline ssl::Ensemble specialist_ensemble(const ClassComparison& ex, const ssl::SslData& data,
                                         const scoring::ScoreConfig& config) {
  ssl::Ensemble ens;
  for (std::size_t c = 0; c < ex.score_specialists.size(); ++c) {
    const auto& model = ex.score_specialists[c].model;
    ens.members.push_back({c, model, ssl::labeled_profile(model, data.train, data.train_ids, c, config)});
  }
  return ens;
}

inline double accuracy_of(std::span<const std::size_t> predicted, std::span<const std::size_t> truth) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hit += predicted[i] == truth[i] ? 1 : 0;
  return predicted.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(predicted.size());
}

}  // namespace actscore::app
