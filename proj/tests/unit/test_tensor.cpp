#include <gtest/gtest.h>

#include <cstdlib>
#include <set>

#include "actscore/parallel.hpp"
#include "actscore/rng.hpp"
#include "actscore/tensor.hpp"

using namespace actscore;

TEST(Tensor, ShapeAndData) {
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.ndim(), 2u);
  EXPECT_EQ(t.dim(1), 3u);
  EXPECT_EQ(t[4], 5.0);
  const Tensor r = t.reshaped({6});
  EXPECT_EQ(r.shape(), Shape{6});
  EXPECT_EQ(r.vec(), t.vec());
}

TEST(Tensor, RejectsBadShapes) {
  EXPECT_THROW(Tensor({2, 0}), ShapeError);
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), ShapeError);
  EXPECT_THROW(Tensor({4}).reshaped({3}), ShapeError);
}

TEST(Tensor, Predicates) {
  Tensor t = Tensor::filled({3}, 1.5);
  EXPECT_TRUE(t.all_finite());
  EXPECT_TRUE(t.all_nonnegative());
  t[1] = -0.25;
  EXPECT_FALSE(t.all_nonnegative());
  t[1] = std::nan("");
  EXPECT_FALSE(t.all_finite());
  EXPECT_FALSE(t.all_nonnegative());
}

TEST(Rng, ReplaysFromSeed) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    EXPECT_EQ(x, b.next_u64());
    EXPECT_NE(x, c.next_u64());
  }
}

TEST(Rng, KnownSplitmixValue) {
  // first output of splitmix64 seeded with 0
  Rng r(0);
  EXPECT_EQ(r.next_u64(), 0xe220a8397b1dcdafULL);
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
  Rng r(7);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 2000; ++i) {
    const auto v = r.below(5);
    ASSERT_LT(v, 5u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 5u);
}

TEST(Rng, UniformAndNormalMoments) {
  Rng r(11);
  double su = 0, sn = 0, sn2 = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 0.01);
  EXPECT_NEAR(sn / n, 0.0, 0.03);
  EXPECT_NEAR(sn2 / n, 1.0, 0.05);
}

TEST(Rng, DeriveSeedSeparatesCounters) {
  EXPECT_NE(derive_seed(1, {0, 1}), derive_seed(1, {1, 0}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
  EXPECT_EQ(derive_seed(9, {3, 4}), derive_seed(9, {3, 4}));
}

TEST(Parallel, ForVisitsEveryIndexOnce) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; });
  for (int h : hits) EXPECT_EQ(h, 1);
}

TEST(Parallel, ForPropagatesExceptions) {
  EXPECT_THROW(parallel_for(50, [](std::size_t i) {
                 if (i == 17) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}

TEST(Parallel, TreeReduceOrderIsFixed) {
  // pairs combine as ((a0+a1)+(a2+a3))+a4
  std::vector<double> v{1e16, 1.0, -1e16, 1.0, 3.0};
  const double got = tree_reduce(v, [](double& a, const double& b) { a += b; });
  const double expect = ((1e16 + 1.0) + (-1e16 + 1.0)) + 3.0;
  EXPECT_EQ(got, expect);
}

TEST(Parallel, ThreadCountHonoursEnvironment) {
  setenv("ACTSCORE_THREADS", "3", 1);
  EXPECT_EQ(thread_count(), 3u);
  setenv("ACTSCORE_THREADS", "zero", 1);
  EXPECT_GE(thread_count(), 1u);
  unsetenv("ACTSCORE_THREADS");
}
