#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "actscore/error.hpp"
#include "actscore/parallel.hpp"
#include "actscore/rng.hpp"

namespace actscore::stats {

struct BootstrapResult {
  double mean_a = 0.0;
  double mean_b = 0.0;
  double diff = 0.0;         // mean_a - mean_b
  double p_one_sided = 1.0;  // H1: mean_a > mean_b
  std::size_t resamples = 0;
  std::uint64_t seed = 0;
  double ci_lower_95 = 0.0;  // 5th percentile of resampled differences
};

inline double mean(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Unpaired two-sample percentile bootstrap of mean(a) - mean(b).
/// p = (#{resampled diff <= 0} + 1) / (B + 1). Resample r draws from its own
/// stream derive_seed(seed, {r}) over the sorted samples, so the result is
/// independent of sample order and of thread scheduling.
inline BootstrapResult bootstrap_diff_mean(std::span<const double> sample_a, std::span<const double> sample_b,
                                           std::size_t resamples, std::uint64_t seed) {
  if (sample_a.empty() || sample_b.empty()) throw ArgumentError("bootstrap_diff_mean: empty sample");
  if (resamples < 1) throw ArgumentError("bootstrap_diff_mean: need at least one resample");
  std::vector<double> a(sample_a.begin(), sample_a.end()), b(sample_b.begin(), sample_b.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  BootstrapResult res;
  res.mean_a = mean(a);
  res.mean_b = mean(b);
  res.diff = res.mean_a - res.mean_b;
  res.resamples = resamples;
  res.seed = seed;

  std::vector<double> diffs(resamples);
  parallel_for(resamples, [&](std::size_t r) {
    Rng rng(derive_seed(seed, {r}));
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sa += a[rng.below(a.size())];
    for (std::size_t i = 0; i < b.size(); ++i) sb += b[rng.below(b.size())];
    diffs[r] = sa / static_cast<double>(a.size()) - sb / static_cast<double>(b.size());
  });
  const auto at_most_zero = std::count_if(diffs.begin(), diffs.end(), [](double d) { return d <= 0.0; });
  res.p_one_sided = static_cast<double>(at_most_zero + 1) / static_cast<double>(resamples + 1);
  std::sort(diffs.begin(), diffs.end());
  const auto rank = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(resamples)));
  res.ci_lower_95 = diffs[rank == 0 ? 0 : rank - 1];
  return res;
}

/// Fixed-point text with `decimals` places.
inline std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

/// p-values are truncated, not rounded, to 4 places: the smallest attainable
/// value 1/(B+1) displays as 0.0000 for the default B.
inline std::string format_p(double p) {
  const double t = std::floor(p * 1e4) / 1e4;
  return fixed(t, 4);
}

/// One line of the significance table. Accuracy samples are fractions in
/// [0, 1]; the CSV reports percentages.
struct SignificanceRow {
  std::size_t class_id = 0;
  BootstrapResult train_vs_baseline;    // a = train, b = baseline
  BootstrapResult softmax_vs_baseline;  // a = softmax, b = baseline
};

inline SignificanceRow significance_row(std::size_t class_id, std::span<const double> baseline,
                                        std::span<const double> train, std::span<const double> softmax,
                                        std::size_t resamples, std::uint64_t seed) {
  return {class_id, bootstrap_diff_mean(train, baseline, resamples, derive_seed(seed, {class_id, 1})),
          bootstrap_diff_mean(softmax, baseline, resamples, derive_seed(seed, {class_id, 2}))};
}

inline constexpr const char* kSignificanceHeader = "class,baseline,train,diff_tb,p_tb,softmax,diff_sb,p_sb,diff_ts";

inline std::string significance_line(const SignificanceRow& row) {
  const auto& tb = row.train_vs_baseline;
  const auto& sb = row.softmax_vs_baseline;
  return std::to_string(row.class_id) + "," + fixed(100.0 * tb.mean_b, 3) + "," + fixed(100.0 * tb.mean_a, 3) + "," +
         fixed(100.0 * tb.diff, 3) + "," + format_p(tb.p_one_sided) + "," + fixed(100.0 * sb.mean_a, 3) + "," +
         fixed(100.0 * sb.diff, 3) + "," + format_p(sb.p_one_sided) + "," + fixed(100.0 * (tb.mean_a - sb.mean_a), 3);
}

inline std::string significance_csv(std::span<const SignificanceRow> rows) {
  std::string out = std::string(kSignificanceHeader) + "\n";
  for (const auto& r : rows) out += significance_line(r) + "\n";
  return out;
}

}  // namespace actscore::stats
