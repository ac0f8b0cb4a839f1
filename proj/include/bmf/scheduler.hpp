#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace bmf {

struct BlockId {
  std::size_t row = 0;
  std::size_t col = 0;

  friend bool operator==(const BlockId&, const BlockId&) = default;
  friend auto operator<=>(const BlockId&, const BlockId&) = default;
};

// Ordered parallel steps; blocks inside a step share no block row and no
// block column, so they can be factorized concurrently.
struct Schedule {
  std::vector<std::vector<BlockId>> steps;

  std::size_t block_count() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.size();
    return n;
  }
};

// Latin-square wavefront over an L x L embedding, L = max(I, J). Step s holds
// block ((j + s) mod L, j) for every column j whose row is in bounds: the
// diagonal first, then each column wraps downward from its diagonal block.
inline Schedule wavefront(std::size_t row_blocks, std::size_t col_blocks) {
  if (row_blocks < 1 || col_blocks < 1) throw config_error("wavefront needs a non-empty grid");
  const std::size_t side = std::max(row_blocks, col_blocks);
  Schedule sched;
  sched.steps.resize(side);
  for (std::size_t s = 0; s < side; ++s) {
    for (std::size_t j = 0; j < col_blocks; ++j) {
      const std::size_t i = (j + s) % side;
      if (i < row_blocks) sched.steps[s].push_back({i, j});
    }
  }
  return sched;
}

}  // namespace bmf
