#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "ratings.hpp"

namespace bmf {

// I x J partition of the zero-padded index space into equal blocks. Padding
// is virtual: padded rows and columns never hold observed entries.
struct BlockGrid {
  std::size_t row_blocks = 1;
  std::size_t col_blocks = 1;
  std::size_t n_users = 0;
  std::size_t n_items = 0;
  std::size_t row_block_size = 0;
  std::size_t col_block_size = 0;

  std::size_t padded_rows() const noexcept { return row_blocks * row_block_size; }
  std::size_t padded_cols() const noexcept { return col_blocks * col_block_size; }
  std::size_t block_count() const noexcept { return row_blocks * col_blocks; }

  // Half-open ranges of real (unpadded) indices owned by block row i / col j.
  std::pair<std::size_t, std::size_t> user_range(std::size_t i) const noexcept {
    return {std::min(i * row_block_size, n_users), std::min((i + 1) * row_block_size, n_users)};
  }
  std::pair<std::size_t, std::size_t> item_range(std::size_t j) const noexcept {
    return {std::min(j * col_block_size, n_items), std::min((j + 1) * col_block_size, n_items)};
  }

  friend bool operator==(const BlockGrid&, const BlockGrid&) = default;
};

inline BlockGrid make_grid(std::size_t n_users, std::size_t n_items, std::size_t row_blocks,
                           std::size_t col_blocks) {
  if (n_users < 1 || n_items < 1) throw config_error("grid needs a non-empty matrix");
  if (row_blocks < 1 || col_blocks < 1) throw config_error("grid needs at least one block");
  if (row_blocks > n_users || col_blocks > n_items) {
    throw config_error("grid " + std::to_string(row_blocks) + "x" + std::to_string(col_blocks) +
                       " has more blocks than rows or columns in a " + std::to_string(n_users) +
                       "x" + std::to_string(n_items) + " matrix");
  }
  BlockGrid g;
  g.row_blocks = row_blocks;
  g.col_blocks = col_blocks;
  g.n_users = n_users;
  g.n_items = n_items;
  g.row_block_size = (n_users + row_blocks - 1) / row_blocks;
  g.col_block_size = (n_items + col_blocks - 1) / col_blocks;
  // e.g. 10 rows in 6 blocks: size 2 leaves the last block pure padding.
  if ((row_blocks - 1) * g.row_block_size >= n_users ||
      (col_blocks - 1) * g.col_block_size >= n_items) {
    throw config_error("grid " + std::to_string(row_blocks) + "x" + std::to_string(col_blocks) +
                       " leaves a block with no real rows or columns");
  }
  return g;
}

inline std::pair<std::size_t, std::size_t> assign_block(const Rating& r, const BlockGrid& g) {
  if (r.user >= g.n_users || r.item >= g.n_items) {
    throw data_error("rating (" + std::to_string(r.user) + ", " + std::to_string(r.item) +
                     ") outside the grid");
  }
  return {r.user / g.row_block_size, r.item / g.col_block_size};
}

// The observed entries of block (block_row, block_col), plus the index
// ranges it owns. `first_index` is the position of entries[0] within the
// owning BlockedRatings, so entries keep a stable global id.
struct BlockView {
  std::size_t block_row = 0;
  std::size_t block_col = 0;
  std::span<const Rating> entries;
  std::pair<std::size_t, std::size_t> user_range;
  std::pair<std::size_t, std::size_t> item_range;
  std::size_t first_index = 0;
};

// Ratings bucketed so each block is a contiguous slice, sorted by
// (block_row, block_col, user, item): row-major traversal inside a block.
class BlockedRatings {
public:
  BlockedRatings(const RatingTriples& data, const BlockGrid& grid) : grid_(grid) {
    if (data.n_users() != grid.n_users || data.n_items() != grid.n_items) {
      throw dimension_error("grid built for " + std::to_string(grid.n_users) + "x" +
                            std::to_string(grid.n_items) + " but data is " +
                            std::to_string(data.n_users()) + "x" + std::to_string(data.n_items()));
    }
    entries_.assign(data.entries().begin(), data.entries().end());
    auto key = [&](const Rating& r) {
      auto [bi, bj] = assign_block(r, grid_);
      return std::tuple(bi, bj, r.user, r.item);
    };
    std::sort(entries_.begin(), entries_.end(),
              [&](const Rating& a, const Rating& b) { return key(a) < key(b); });

    offsets_.assign(grid_.block_count() + 1, 0);
    for (const auto& r : entries_) {
      auto [bi, bj] = assign_block(r, grid_);
      ++offsets_[bi * grid_.col_blocks + bj + 1];
    }
    for (std::size_t b = 0; b < grid_.block_count(); ++b) offsets_[b + 1] += offsets_[b];
  }

  const BlockGrid& grid() const noexcept { return grid_; }
  std::span<const Rating> entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }

  std::size_t block_size(std::size_t i, std::size_t j) const {
    const std::size_t b = i * grid_.col_blocks + j;
    return offsets_[b + 1] - offsets_[b];
  }

  BlockView view(std::size_t i, std::size_t j) const {
    const std::size_t b = i * grid_.col_blocks + j;
    BlockView v;
    v.block_row = i;
    v.block_col = j;
    v.first_index = offsets_[b];
    v.entries = std::span<const Rating>(entries_).subspan(offsets_[b], offsets_[b + 1] - offsets_[b]);
    v.user_range = grid_.user_range(i);
    v.item_range = grid_.item_range(j);
    return v;
  }

private:
  BlockGrid grid_;
  std::vector<Rating> entries_;
  std::vector<std::size_t> offsets_;
};

}  // namespace bmf
