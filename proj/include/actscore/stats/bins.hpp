#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "actscore/error.hpp"
#include "actscore/scoring/profile.hpp"
#include "actscore/stats/bootstrap.hpp"

namespace actscore::stats {

enum class SplitTag { train, test };

struct ScoreBinRow {
  double lower = 0.0;  // interval (lower, upper]; both -inf for the sentinel row
  double upper = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::optional<double> acc_train;  // empty when the bin has no images
  std::optional<double> acc_test;
  std::optional<double> prop_train;  // empty when the split has no images
  std::optional<double> prop_test;

  bool neg_inf_row() const noexcept { return lower == scoring::kNegInf; }
};

/// Edges -7.0, -6.3, ..., 0.0.
inline std::vector<double> default_bin_edges() {
  std::vector<double> e;
  for (int k = 10; k >= 0; --k) e.push_back(-static_cast<double>(7 * k) / 10.0);
  return e;
}

/// Edges at the 0, 1/bins, ..., 1 quantiles of the finite scores, with
/// repeated values dropped, so the intervals follow the range the scores
/// actually occupy.
inline std::vector<double> quantile_bin_edges(std::span<const double> scores, std::size_t bins) {
  if (bins == 0) throw ArgumentError("quantile_bin_edges: need at least one bin");
  std::vector<double> finite;
  for (double s : scores)
    if (s != scoring::kNegInf) finite.push_back(s);
  std::sort(finite.begin(), finite.end());
  std::vector<double> e;
  for (std::size_t k = 0; k <= bins && !finite.empty(); ++k) {
    const double q = finite[k * (finite.size() - 1) / bins];
    if (e.empty() || q > e.back()) e.push_back(q);
  }
  if (e.size() < 2) throw ArgumentError("quantile_bin_edges: fewer than two distinct finite scores");
  return e;
}

/// Row 0 collects kNegInf scores. Finite scores go to the (lower, upper]
/// interval containing them; scores at or below the first edge join the
/// lowest interval and scores above the last edge the highest.
inline std::vector<ScoreBinRow> bin_score_report(std::span<const double> scores, std::span<const bool> correct,
                                                 std::span<const SplitTag> splits, std::span<const double> edges) {
  if (scores.size() != correct.size() || scores.size() != splits.size())
    throw ArgumentError("bin_score_report: misaligned inputs (" + std::to_string(scores.size()) + " scores, " +
                        std::to_string(correct.size()) + " flags, " + std::to_string(splits.size()) + " tags)");
  if (edges.size() < 2) throw ArgumentError("bin_score_report: need at least two bin edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw ArgumentError("bin_score_report: bin edges must be strictly increasing");

  const std::size_t bins = edges.size() - 1;
  std::vector<ScoreBinRow> rows(bins + 1);
  rows[0].lower = rows[0].upper = scoring::kNegInf;
  for (std::size_t b = 0; b < bins; ++b) {
    rows[b + 1].lower = edges[b];
    rows[b + 1].upper = edges[b + 1];
  }
  std::vector<std::size_t> hit_train(rows.size(), 0), hit_test(rows.size(), 0);
  std::size_t total_train = 0, total_test = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    std::size_t row = 0;
    if (scores[i] != scoring::kNegInf) {
      const auto it = std::lower_bound(edges.begin(), edges.end(), scores[i]);
      const auto idx = static_cast<std::size_t>(it - edges.begin());
      row = 1 + std::clamp<std::size_t>(idx == 0 ? 0 : idx - 1, 0, bins - 1);
    }
    if (splits[i] == SplitTag::train) {
      ++rows[row].n_train;
      ++total_train;
      hit_train[row] += correct[i] ? 1 : 0;
    } else {
      ++rows[row].n_test;
      ++total_test;
      hit_test[row] += correct[i] ? 1 : 0;
    }
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto& row = rows[r];
    if (row.n_train) row.acc_train = static_cast<double>(hit_train[r]) / static_cast<double>(row.n_train);
    if (row.n_test) row.acc_test = static_cast<double>(hit_test[r]) / static_cast<double>(row.n_test);
    if (total_train) row.prop_train = static_cast<double>(row.n_train) / static_cast<double>(total_train);
    if (total_test) row.prop_test = static_cast<double>(row.n_test) / static_cast<double>(total_test);
  }
  return rows;
}

inline std::string bin_report_csv(std::span<const ScoreBinRow> rows) {
  auto bound = [](double v) { return v == scoring::kNegInf ? std::string("-inf") : fixed(v, 6); };
  auto opt = [](const std::optional<double>& v) { return v ? fixed(*v, 6) : std::string(); };
  std::string out = "lower,upper,n_train,n_test,acc_train,acc_test,prop_train,prop_test\n";
  for (const auto& r : rows)
    out += bound(r.lower) + "," + bound(r.upper) + "," + std::to_string(r.n_train) + "," + std::to_string(r.n_test) +
           "," + opt(r.acc_train) + "," + opt(r.acc_test) + "," + opt(r.prop_train) + "," + opt(r.prop_test) + "\n";
  return out;
}

/// Ranks with ties averaged, 1-based.
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman rank correlation; NaN when either side has no rank variance.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ArgumentError("spearman: length mismatch");
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double mx = mean(rx), my = mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sxy / std::sqrt(sxx * syy);
}

/// Spearman correlation of bin midpoint against bin accuracy over the
/// non-empty finite bins of one split.
inline double bin_trend(std::span<const ScoreBinRow> rows, SplitTag split) {
  std::vector<double> mid, acc;
  for (const auto& r : rows) {
    if (r.neg_inf_row()) continue;
    const auto& a = split == SplitTag::train ? r.acc_train : r.acc_test;
    if (!a) continue;
    mid.push_back((r.lower + r.upper) / 2.0);
    acc.push_back(*a);
  }
  return spearman(mid, acc);
}

}  // namespace actscore::stats
