#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "actscore/stats/bins.hpp"

using namespace actscore;
using namespace actscore::stats;
using scoring::kNegInf;

namespace {

// Per-image loop: which row does score s belong to?
std::size_t naive_row(double s, const std::vector<double>& edges) {
  if (s == kNegInf) return 0;
  const std::size_t bins = edges.size() - 1;
  if (s <= edges[1]) return 1;
  for (std::size_t b = 1; b < bins; ++b)
    if (s > edges[b] && s <= edges[b + 1]) return b + 1;
  return bins;
}

}  // namespace

TEST(Bins, DefaultEdges) {
  const auto e = default_bin_edges();
  ASSERT_EQ(e.size(), 11u);
  EXPECT_EQ(e.front(), -7.0);
  EXPECT_EQ(e[1], -6.3);
  EXPECT_EQ(e.back(), 0.0);
}

TEST(Bins, AllInOneBin) {
  const std::vector<double> s{-0.1, -0.2, -0.3};
  const bool c[] = {true, false, true};
  const std::vector<SplitTag> t(3, SplitTag::train);
  const auto rows = bin_score_report(s, c, t, default_bin_edges());
  for (std::size_t r = 0; r + 1 < rows.size(); ++r) EXPECT_EQ(*rows[r].prop_train, 0.0);
  EXPECT_EQ(*rows.back().prop_train, 1.0);
  EXPECT_DOUBLE_EQ(*rows.back().acc_train, 2.0 / 3.0);
  EXPECT_FALSE(rows.back().prop_test.has_value());
}

TEST(Bins, MatchesNaiveLoop) {
  Rng rng(5);
  const auto edges = default_bin_edges();
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + rng.below(200);
    std::vector<double> s(n);
    auto flags = std::make_unique<bool[]>(n);
    std::vector<SplitTag> tags(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto kind = rng.below(10);
      s[i] = kind == 0 ? kNegInf : kind == 1 ? edges[rng.below(edges.size())] : -8.0 * rng.uniform() + 0.5;
      flags[i] = rng.below(2) == 1;
      tags[i] = rng.below(3) == 0 ? SplitTag::test : SplitTag::train;
    }
    const auto rows = bin_score_report(s, std::span<const bool>(flags.get(), n), tags, edges);
    ASSERT_EQ(rows.size(), edges.size());
    std::vector<std::size_t> nt(rows.size()), ne(rows.size()), ct(rows.size()), ce(rows.size());
    std::size_t total_t = 0, total_e = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = naive_row(s[i], edges);
      if (tags[i] == SplitTag::train) {
        ++nt[r], ++total_t, ct[r] += flags[i];
      } else {
        ++ne[r], ++total_e, ce[r] += flags[i];
      }
    }
    double sum_t = 0.0, sum_e = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      ASSERT_EQ(rows[r].n_train, nt[r]);
      ASSERT_EQ(rows[r].n_test, ne[r]);
      if (nt[r]) {
        ASSERT_EQ(*rows[r].acc_train, static_cast<double>(ct[r]) / static_cast<double>(nt[r]));
      } else {
        ASSERT_FALSE(rows[r].acc_train.has_value());
      }
      if (ne[r]) {
        ASSERT_EQ(*rows[r].acc_test, static_cast<double>(ce[r]) / static_cast<double>(ne[r]));
      } else {
        ASSERT_FALSE(rows[r].acc_test.has_value());
      }
      if (total_t) sum_t += *rows[r].prop_train;
      if (total_e) sum_e += *rows[r].prop_test;
    }
    if (total_t) {
      ASSERT_NEAR(sum_t, 1.0, 1e-12);
    }
    if (total_e) {
      ASSERT_NEAR(sum_e, 1.0, 1e-12);
    }
  }
}

TEST(Bins, SentinelRowAndEmptyMarker) {
  const std::vector<double> s{kNegInf, -0.5};
  const bool c[] = {false, true};
  const std::vector<SplitTag> t{SplitTag::test, SplitTag::test};
  const std::vector<double> edges{-1.0, 0.0};
  const auto rows = bin_score_report(s, c, t, edges);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_TRUE(rows[0].neg_inf_row());
  EXPECT_EQ(*rows[0].acc_test, 0.0);
  EXPECT_FALSE(rows[0].acc_train.has_value());
  EXPECT_FALSE(rows[0].prop_train.has_value());
  EXPECT_EQ(*rows[1].prop_test, 0.5);
  EXPECT_EQ(bin_report_csv(rows),
            "lower,upper,n_train,n_test,acc_train,acc_test,prop_train,prop_test\n"
            "-inf,-inf,0,1,,0.000000,,0.500000\n"
            "-1.000000,0.000000,0,1,,1.000000,,0.500000\n");
}

TEST(Bins, Rejections) {
  const std::vector<double> s{-0.5, -0.2};
  const bool c[] = {true};
  const std::vector<SplitTag> t{SplitTag::train, SplitTag::train};
  EXPECT_THROW(bin_score_report(s, c, t, default_bin_edges()), ArgumentError);
  const bool c2[] = {true, false};
  EXPECT_THROW(bin_score_report(s, c2, t, std::vector<double>{0.0}), ArgumentError);
  EXPECT_THROW(bin_score_report(s, c2, t, std::vector<double>{0.0, -1.0}), ArgumentError);
}

TEST(Ranks, AverageTies) {
  const std::vector<double> v{3.0, 1.0, 3.0, 2.0};
  EXPECT_EQ(average_ranks(v), (std::vector<double>{3.5, 1.0, 3.5, 2.0}));
}

TEST(Ranks, Spearman) {
  const std::vector<double> x{1, 2, 3, 4}, up{10, 20, 25, 90}, down{4, 3, 2, 1};
  EXPECT_DOUBLE_EQ(spearman(x, up), 1.0);
  EXPECT_DOUBLE_EQ(spearman(x, down), -1.0);
  EXPECT_TRUE(std::isnan(spearman(x, std::vector<double>{1, 1, 1, 1})));
  EXPECT_THROW(spearman(x, std::vector<double>{1.0}), ArgumentError);
}

TEST(Ranks, TrendSkipsSentinelAndEmptyBins) {
  std::vector<ScoreBinRow> rows(4);
  rows[0].lower = rows[0].upper = kNegInf;
  rows[0].acc_train = 0.99;
  rows[1] = {-3, -2, 5, 0, 0.5, {}, {}, {}};
  rows[2] = {-2, -1, 0, 0, {}, {}, {}, {}};
  rows[3] = {-1, 0, 5, 0, 0.9, {}, {}, {}};
  rows.push_back({0, 1, 5, 0, 0.8, {}, {}, {}});
  EXPECT_DOUBLE_EQ(bin_trend(rows, SplitTag::train), 0.5);
  EXPECT_TRUE(std::isnan(bin_trend(rows, SplitTag::test)));
}

TEST(Bins, QuantileEdges) {
  const std::vector<double> s{kNegInf, 4, 0, 1, 2, 3, 5, 6, 7, 8, 9, kNegInf};
  EXPECT_EQ(quantile_bin_edges(s, 3), (std::vector<double>{0, 3, 6, 9}));
  EXPECT_EQ(quantile_bin_edges(s, 1), (std::vector<double>{0, 9}));
  const std::vector<double> ties{-1, -1, -1, 0, 0};
  EXPECT_EQ(quantile_bin_edges(ties, 4), (std::vector<double>{-1, 0}));
  EXPECT_THROW(quantile_bin_edges(std::vector<double>{2, 2, kNegInf}, 4), ArgumentError);
  EXPECT_THROW(quantile_bin_edges(s, 0), ArgumentError);
}
