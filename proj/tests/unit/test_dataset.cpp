#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "actscore/data/dataset.hpp"

using namespace actscore;
using namespace actscore::data;

TEST(Synthetic, BalancedLabelsAndShape) {
  const auto ds = generate_synthetic(4, 10, 8, 8, 0.5, 1);
  EXPECT_EQ(ds.size(), 40u);
  EXPECT_EQ(ds.pixels.size(), 40u * 64u);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_EQ(std::count(ds.labels.begin(), ds.labels.end(), k), 10);
}

TEST(Synthetic, NoNoiseMeansIdenticalClassImages) {
  const auto ds = generate_synthetic(3, 5, 8, 8, 0.0, 2);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < ds.size(); ++j) {
      const bool same = std::ranges::equal(ds.image(i), ds.image(j));
      if (ds.labels[i] == ds.labels[j]) EXPECT_TRUE(same);
      else EXPECT_FALSE(same);
    }
}

TEST(Synthetic, SameSeedSameBytes) {
  EXPECT_EQ(encode_dataset(generate_synthetic(4, 6, 16, 16, 0.8, 3)),
            encode_dataset(generate_synthetic(4, 6, 16, 16, 0.8, 3)));
  EXPECT_NE(encode_dataset(generate_synthetic(4, 6, 16, 16, 0.8, 3)),
            encode_dataset(generate_synthetic(4, 6, 16, 16, 0.8, 4)));
}

TEST(Synthetic, RejectsInvalidRanges) {
  EXPECT_THROW(generate_synthetic(1, 5, 8, 8, 0.1, 1), ArgumentError);
  EXPECT_THROW(generate_synthetic(17, 5, 8, 8, 0.1, 1), ArgumentError);
  EXPECT_THROW(generate_synthetic(4, 0, 8, 8, 0.1, 1), ArgumentError);
  EXPECT_THROW(generate_synthetic(4, 5, 8, 8, 1.5, 1), ArgumentError);
}

TEST(Split, DefaultProportionsOnFiftyImages) {
  const auto ds = generate_synthetic(2, 25, 4, 4, 0.3, 1);
  const auto sp = split_dataset(ds, {0.6, 0.4, 0.0, 7});
  EXPECT_EQ(sp.train.size(), 30u);
  EXPECT_EQ(sp.additional.size(), 20u);
  EXPECT_EQ(sp.test.size(), 0u);
}

TEST(Split, AllTrain) {
  const auto ds = generate_synthetic(2, 5, 4, 4, 0.3, 1);
  const auto sp = split_dataset(ds, {1.0, 0.0, 0.0, 1});
  EXPECT_EQ(sp.train.size(), 10u);
  EXPECT_EQ(sp.additional.size(), 0u);
  EXPECT_EQ(sp.test.size(), 0u);
}

TEST(Split, PartitionOfIds) {
  const auto ds = generate_synthetic(3, 7, 4, 4, 0.3, 1);
  const auto sp = split_dataset(ds, {0.5, 0.3, 0.2, 11});
  std::multiset<std::uint64_t> ids;
  for (const auto* part : {&sp.train, &sp.additional, &sp.test}) ids.insert(part->ids.begin(), part->ids.end());
  EXPECT_EQ(ids, std::multiset<std::uint64_t>(ds.ids.begin(), ds.ids.end()));
  EXPECT_EQ(sp.additional.size(), 6u);  // floor(0.3 * 21)
  EXPECT_EQ(sp.test.size(), 4u);        // floor(0.2 * 21)
  EXPECT_EQ(sp.train.size(), 11u);      // rest, including rounding leftovers
}

TEST(Split, RemainderBeyondRequestedTotalIsUnassigned) {
  const auto ds = generate_synthetic(2, 10, 4, 4, 0.3, 1);
  const auto sp = split_dataset(ds, {0.2, 0.3, 0.1, 5});
  EXPECT_EQ(sp.train.size() + sp.additional.size() + sp.test.size(), 12u);
}

TEST(Split, KeepsPixelsWithIds) {
  const auto ds = generate_synthetic(2, 6, 4, 4, 0.5, 1);
  const auto sp = split_dataset(ds, {0.5, 0.5, 0.0, 3});
  for (std::size_t i = 0; i < sp.additional.size(); ++i) {
    const auto id = sp.additional.ids[i];
    EXPECT_TRUE(std::ranges::equal(sp.additional.image(i), ds.image(id)));
    EXPECT_EQ(sp.additional.labels[i], ds.labels[id]);
  }
}

TEST(Split, RejectsBadFractions) {
  const auto ds = generate_synthetic(2, 5, 4, 4, 0.3, 1);
  EXPECT_THROW(split_dataset(ds, {0.7, 0.5, 0.0, 1}), ArgumentError);
  EXPECT_THROW(split_dataset(ds, {-0.1, 0.5, 0.0, 1}), ArgumentError);
}

TEST(Dataset, ImageTensorsScaleToUnitInterval) {
  const auto ds = generate_synthetic(2, 2, 4, 4, 0.5, 1);
  const Tensor t = image_tensor(ds, 1);
  EXPECT_EQ(t.shape(), (Shape{1, 4, 4}));
  for (std::size_t i = 0; i < t.size(); ++i) EXPECT_EQ(t[i], ds.image(1)[i] / 255.0);
}
