#include "fixtures.hpp"

#include <cflab/baselines.hpp>
#include <cflab/correlation.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace cflab;

TEST(ItemMean, HandExamples) {
  RatingMatrix m(3, 3, {1, 5});
  m.insert(0, 0, 2);
  m.insert(1, 0, 4);
  EXPECT_DOUBLE_EQ(predict_item_mean(m, 2, 0).value, 3.0);
  EXPECT_FALSE(predict_item_mean(m, 2, 0).fallback);

  RatingMatrix g(2, 2, {1, 5});
  g.insert(0, 0, 1);
  g.insert(1, 0, 5);
  const auto cold = predict_item_mean(g, 0, 1);
  EXPECT_DOUBLE_EQ(cold.value, 3.0);
  EXPECT_TRUE(cold.fallback);

  EXPECT_DOUBLE_EQ(predict_item_mean(RatingMatrix(2, 2, {1, 5}), 0, 0).value, 3.0);
}

TEST(UserMean, HandExamples) {
  RatingMatrix m(3, 2, {-10, 10});
  m.insert(0, 0, -10);
  m.insert(0, 1, 10);
  m.insert(1, 0, 7);
  EXPECT_DOUBLE_EQ(predict_user_mean(m, 0, 1).value, 0.0);
  EXPECT_DOUBLE_EQ(predict_user_mean(m, 1, 1).value, 7.0);

  RatingMatrix g(2, 2, {-10, 10});
  g.insert(0, 0, 1.0);
  g.insert(0, 1, 1.4);
  const auto cold = predict_user_mean(g, 1, 0);
  EXPECT_NEAR(cold.value, 1.2, 1e-15);
  EXPECT_TRUE(cold.fallback);
}

TEST(ItemMean, SameForEveryUser) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = oracle::random_instance(rng, 12, 10);
    const auto m = fixture::to_matrix(inst.votes);
    for (std::size_t b = 0; b < m.n_items(); ++b) {
      const double v0 = predict_item_mean(m, 0, b).value;
      for (std::size_t j = 1; j < m.n_users(); ++j) EXPECT_EQ(predict_item_mean(m, j, b).value, v0);
      if (auto ref = oracle::item_mean(inst.votes, b)) { EXPECT_NEAR(v0, *ref, 1e-12); }
    }
  }
}

TEST(Blend, EndpointsAndMidpoint) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = oracle::random_instance(rng, 10, 8, true);
    const auto m = fixture::to_matrix(inst.votes);
    const auto raw = raw_similarity(m, 2);
    for (std::size_t j = 0; j < m.n_users(); ++j)
      for (std::size_t b = 0; b < m.n_items(); ++b) {
        EXPECT_DOUBLE_EQ(predict_blend(m, raw, j, b, 0.0).value, predict_item_mean(m, j, b).value);
        EXPECT_DOUBLE_EQ(predict_blend(m, raw, j, b, 1.0).value, predict_weighted(m, raw, j, b).value);
        const double half = predict_blend(m, raw, j, b, 0.5).value;
        EXPECT_NEAR(half,
                    0.5 * predict_weighted(m, raw, j, b).value + 0.5 * predict_item_mean(m, j, b).value,
                    1e-12);
        EXPECT_GE(half, 1.0);
        EXPECT_LE(half, 5.0);
      }
  }
}

TEST(Blend, HandComputation) {
  // One positively correlated rater one point above their mean gives v' = 4;
  // user 2 shares no items, so only moves m(3) to 2.
  RatingMatrix m(3, 4, {-5, 5});
  for (std::size_t i = 0; i < 3; ++i) {
    m.insert(0, i, 2.0 + i);
    m.insert(1, i, 2.0 + i);
  }
  m.insert(1, 3, 13.0 / 3.0);
  m.insert(2, 3, -1.0 / 3.0);
  const auto raw = raw_similarity(m, 3);
  ASSERT_GT(raw(0, 1), 0.0);
  ASSERT_EQ(raw(0, 2), 0.0);
  EXPECT_NEAR(predict_weighted(m, raw, 0, 3).value, 4.0, 1e-12);
  EXPECT_NEAR(*m.item_mean(3), 2.0, 1e-12);
  EXPECT_NEAR(predict_blend(m, raw, 0, 3, 0.5).value, 3.0, 1e-12);
}

TEST(Blend, WeightOutsideUnitIntervalRejected) {
  RatingMatrix m(2, 2, {1, 5});
  m.insert(0, 0, 3);
  const auto raw = raw_similarity(m);
  EXPECT_THROW(predict_blend(m, raw, 0, 0, 1.5), UsageError);
  EXPECT_THROW(predict_blend(m, raw, 0, 0, -0.1), UsageError);
}
