#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <bmf/random.hpp>

namespace {

// Published std::mt19937_64 vectors for the default seed 5489.
TEST(RandomStream, EngineMatchesStandardVectors) {
  bmf::random_stream rng(5489u);
  EXPECT_EQ(rng.next_u64(), 14514284786278117030ull);
  for (int i = 2; i < 10000; ++i) rng.next_u64();
  EXPECT_EQ(rng.next_u64(), 9981545732273789042ull);
}

TEST(RandomStream, UnitDoubleUsesTop53Bits) {
  bmf::random_stream rng(5489u);
  const double expected = static_cast<double>(14514284786278117030ull >> 11) / 9007199254740992.0;
  EXPECT_EQ(rng.next_unit(), expected);
}

TEST(RandomStream, UnitDoubleStaysInHalfOpenInterval) {
  bmf::random_stream rng(7);
  for (int i = 0; i < 100000; ++i) {
    const double x = rng.next_unit();
    ASSERT_GE(x, 0.0);
    ASSERT_LT(x, 1.0);
  }
}

TEST(RandomStream, BoundedDrawsAreRoughlyUniform) {
  bmf::random_stream rng(11);
  constexpr int kBins = 7;
  constexpr int kDraws = 70000;
  std::vector<int> counts(kBins, 0);
  for (int i = 0; i < kDraws; ++i) ++counts[rng.next_below(kBins)];
  // chi-square with 6 dof; 22.46 is the 0.999 quantile
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - kDraws / kBins) * double(c - kDraws / kBins) / (kDraws / kBins);
  EXPECT_LT(chi2, 22.46);
}

TEST(RandomStream, ShuffleIsAPermutationAndSeedDeterministic) {
  std::vector<int> a(100), b(100);
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  bmf::random_stream(3).shuffle(std::span<int>(a));
  bmf::random_stream(3).shuffle(std::span<int>(b));
  EXPECT_EQ(a, b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[i], i);
  EXPECT_FALSE(std::is_sorted(a.begin(), a.end()));
}

}  // namespace
