#include <algorithm>
#include <random>
#include <set>
#include <tuple>
#include <vector>

#include <gtest/gtest.h>

#include <bmf/grid.hpp>

namespace {

using bmf::assign_block;
using bmf::BlockedRatings;
using bmf::make_grid;
using bmf::Rating;
using bmf::RatingTriples;

TEST(MakeGrid, MovieLens1mOnEightByEight) {
  const auto g = make_grid(6040, 3900, 8, 8);
  EXPECT_EQ(g.row_block_size, 755u);
  EXPECT_EQ(g.col_block_size, 488u);
  EXPECT_EQ(g.padded_rows(), 6040u);
  EXPECT_EQ(g.padded_cols(), 3904u);
}

TEST(MakeGrid, SingleBlockHasNoPadding) {
  const auto g = make_grid(10, 10, 1, 1);
  EXPECT_EQ(g.row_block_size, 10u);
  EXPECT_EQ(g.col_block_size, 10u);
  EXPECT_EQ(g.padded_rows(), 10u);
  EXPECT_EQ(g.padded_cols(), 10u);
}

TEST(MakeGrid, CeilBlockSizes) {
  const auto g = make_grid(5, 5, 2, 2);
  EXPECT_EQ(g.row_block_size, 3u);
  EXPECT_EQ(g.col_block_size, 3u);
  EXPECT_EQ(g.padded_rows(), 6u);
  EXPECT_EQ(g.padded_cols(), 6u);
}

TEST(MakeGrid, RejectsMoreBlocksThanRowsOrColumns) {
  EXPECT_THROW(make_grid(3, 10, 4, 1), bmf::config_error);
  EXPECT_THROW(make_grid(10, 3, 1, 4), bmf::config_error);
  EXPECT_THROW(make_grid(10, 10, 0, 1), bmf::config_error);
  EXPECT_THROW(make_grid(0, 10, 1, 1), bmf::config_error);
}

TEST(MakeGrid, RejectsGridsWithAnAllPaddingBlock) {
  // ceil(10/6) = 2, so five blocks already cover all ten rows
  EXPECT_THROW(make_grid(10, 10, 6, 1), bmf::config_error);
}

TEST(MakeGrid, InvariantsHoldForAllSmallShapes) {
  for (std::size_t n = 1; n <= 40; ++n) {
    for (std::size_t blocks = 1; blocks <= n; ++blocks) {
      bmf::BlockGrid g;
      try {
        g = make_grid(n, n, blocks, blocks);
      } catch (const bmf::config_error&) {
        EXPECT_GE((blocks - 1) * ((n + blocks - 1) / blocks), n);
        continue;
      }
      ASSERT_EQ(g.row_block_size * g.row_blocks, g.padded_rows());
      ASSERT_GE(g.padded_rows(), n);
      ASSERT_LT(g.padded_rows() - n, g.row_block_size);
      // coverage: ranges tile [0, n) without overlap
      std::size_t next = 0;
      for (std::size_t i = 0; i < g.row_blocks; ++i) {
        auto [lo, hi] = g.user_range(i);
        ASSERT_EQ(lo, next);
        ASSERT_LT(lo, hi);
        next = hi;
      }
      ASSERT_EQ(next, n);
    }
  }
}

TEST(AssignBlock, Examples) {
  const auto g = make_grid(6040, 3900, 8, 8);
  EXPECT_EQ(assign_block({0, 0, 1.0}, g), (std::pair<std::size_t, std::size_t>(0, 0)));
  EXPECT_EQ(assign_block({754, 487, 1.0}, g), (std::pair<std::size_t, std::size_t>(0, 0)));
  EXPECT_EQ(assign_block({755, 488, 1.0}, g), (std::pair<std::size_t, std::size_t>(1, 1)));
  EXPECT_EQ(assign_block({6039, 3899, 1.0}, g), (std::pair<std::size_t, std::size_t>(7, 7)));
  EXPECT_THROW(assign_block({6040, 0, 1.0}, g), bmf::data_error);
  EXPECT_THROW(assign_block({0, 3900, 1.0}, g), bmf::data_error);
}

RatingTriples random_triples(std::size_t users, std::size_t items, double density,
                             std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::bernoulli_distribution keep(density);
  std::vector<Rating> e;
  for (std::size_t u = 0; u < users; ++u)
    for (std::size_t i = 0; i < items; ++i)
      if (keep(gen)) e.push_back({static_cast<bmf::index_t>(u), static_cast<bmf::index_t>(i), 1.0});
  std::shuffle(e.begin(), e.end(), gen);
  return RatingTriples(users, items, std::move(e));
}

TEST(BlockedRatings, EveryEntryLandsInExactlyOneBlock) {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t users = 1 + gen() % 60, items = 1 + gen() % 60;
    const auto data = random_triples(users, items, 0.2, gen());
    const std::size_t I = 1 + gen() % std::min<std::size_t>(users, 6);
    const std::size_t J = 1 + gen() % std::min<std::size_t>(items, 6);
    bmf::BlockGrid g;
    try {
      g = make_grid(users, items, I, J);
    } catch (const bmf::config_error&) {
      continue;
    }
    const BlockedRatings blocks(data, g);
    std::size_t total = 0;
    std::multiset<std::pair<bmf::index_t, bmf::index_t>> seen;
    for (std::size_t i = 0; i < I; ++i) {
      for (std::size_t j = 0; j < J; ++j) {
        const auto v = blocks.view(i, j);
        total += v.entries.size();
        for (std::size_t e = 0; e < v.entries.size(); ++e) {
          const auto& r = v.entries[e];
          ASSERT_GE(r.user, v.user_range.first);
          ASSERT_LT(r.user, v.user_range.second);
          ASSERT_GE(r.item, v.item_range.first);
          ASSERT_LT(r.item, v.item_range.second);
          ASSERT_EQ(&blocks.entries()[v.first_index + e], &r);
          if (e > 0) {
            const auto& p = v.entries[e - 1];
            ASSERT_LT(std::tie(p.user, p.item), std::tie(r.user, r.item));
          }
          seen.insert({r.user, r.item});
        }
      }
    }
    ASSERT_EQ(total, data.size());
    for (const auto& r : data.entries()) ASSERT_EQ(seen.count({r.user, r.item}), 1u);
  }
}

TEST(BlockedRatings, DimensionMismatchIsRejected) {
  const RatingTriples data(4, 4, {{0, 0, 1.0}});
  EXPECT_THROW(BlockedRatings(data, make_grid(5, 4, 1, 1)), bmf::dimension_error);
}

}  // namespace
