#include "pmisim/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace pmisim {
namespace {

TEST(KeyedRng, SameKeySameSequence) {
  KeyedRng a(42, stream::kFadingInit, 3, 7);
  KeyedRng b(42, stream::kFadingInit, 3, 7);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(KeyedRng, DifferentKeysDiverge) {
  KeyedRng a(42, stream::kFadingInit, 3, 7);
  KeyedRng b(42, stream::kFadingInit, 3, 8);
  int same = 0;
  for (int i = 0; i < 64; ++i) {
    if (a.next_u64() == b.next_u64()) ++same;
  }
  EXPECT_EQ(same, 0);
}

TEST(KeyedRng, UnitRange) {
  KeyedRng rng(1);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.next_unit();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
  }
}

TEST(KeyedRng, GaussianMoments) {
  KeyedRng rng(7);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = rng.next_gaussian();
    sum += g;
    sum2 += g * g;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sum2 / n, 1.0, 0.02);
}

TEST(KeyedRng, ComplexNormalUnitPower) {
  KeyedRng rng(9);
  const int n = 100000;
  double p = 0.0;
  for (int i = 0; i < n; ++i) p += std::norm(rng.next_cn01());
  EXPECT_NEAR(p / n, 1.0, 0.02);
}

TEST(KeyedRng, NextBelowBounds) {
  KeyedRng rng(3);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(rng.next_below(17), 17u);
  EXPECT_EQ(rng.next_below(1), 0u);
}

TEST(Fnv1a, SensitiveToOrder) {
  Fnv1a a, b;
  a.add(1.0);
  a.add(2.0);
  b.add(2.0);
  b.add(1.0);
  EXPECT_NE(a.digest(), b.digest());
}

}  // namespace
}  // namespace pmisim
