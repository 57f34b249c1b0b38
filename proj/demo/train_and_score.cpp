// Trains the default network on a small synthetic set, then checks how
// test accuracy varies with the image score.

#include <cmath>
#include <cstdio>
#include <memory>

#include "actscore/data/dataset.hpp"
#include "actscore/ssl/pipeline.hpp"
#include "actscore/stats/bins.hpp"

using namespace actscore;

int main() {
  const std::uint64_t seed = 4;
  const auto ds = data::generate_synthetic(4, 600, 16, 16, 0.75, seed);
  const auto sp = data::split_dataset(ds, {0.4, 0.3, 0.3, seed});
  const auto train = data::labeled_images(sp.train);
  const auto test = data::labeled_images(sp.test);

  const auto fit = nn::fit(nn::make_default_model({1, 16, 16}, 4, seed), train, 20, {32, 1e-3, seed}, &test);
  for (const auto& m : fit.metrics)
    std::printf("epoch %2zu  loss %.4f  test accuracy %.3f\n", m.epoch, m.train_loss, m.test->accuracy);

  const scoring::ScoreConfig cfg{scoring::Norm::max, 2.0, scoring::ThresholdBasis::mean};
  std::vector<scoring::ClassActivationProfile> profiles;
  for (std::size_t c = 0; c < 4; ++c) profiles.push_back(ssl::labeled_profile(fit.model, train, sp.train.ids, c, cfg));

  std::vector<double> scores;
  auto correct = std::make_unique<bool[]>(test.size());
  // scores under the mean basis are not confined to <= 0, so bin at score octiles
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto fr = nn::forward_with_trace(fit.model, test.images[i], sp.test.ids[i]);
    const auto label = nn::argmax(fr.probs.values());
    scores.push_back(scoring::score_image(fr.trace, profiles[label]).score);
    correct[i] = label == test.labels[i];
  }
  const std::vector<stats::SplitTag> tags(test.size(), stats::SplitTag::test);
  const auto rows = stats::bin_score_report(scores, std::span<const bool>(correct.get(), test.size()), tags,
                                            stats::quantile_bin_edges(scores, 8));
  std::printf("\n%-18s %6s %8s\n", "score interval", "images", "accuracy");
  for (const auto& r : rows) {
    if (r.n_test == 0) continue;
    char label[32];
    if (r.neg_inf_row()) std::snprintf(label, sizeof label, "-inf");
    else std::snprintf(label, sizeof label, "(%.2f, %.2f]", r.lower, r.upper);
    std::printf("%-18s %6zu %8.3f\n", label, r.n_test, *r.acc_test);
  }
  const double rho = stats::bin_trend(rows, stats::SplitTag::test);
  if (!std::isnan(rho)) std::printf("spearman(bin midpoint, accuracy) = %.3f\n", rho);
}
