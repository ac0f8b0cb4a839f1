#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace bmf {

// Portable randomness. std::mt19937_64 is fully specified by the C++
// standard (the 10000th draw from the default seed is 9981545732273789042),
// but the standard distributions are not, so the conversions below are
// written out here. Any change to them bumps kRandomStreamVersion.
inline constexpr int kRandomStreamVersion = 1;

class random_stream {
public:
  explicit random_stream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Top 53 bits scaled to [0, 1).
  double next_unit() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on [0, bound) by rejection; bound must be > 0.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t draw;
    do {
      draw = engine_();
    } while (draw >= limit);
    return draw % bound;
  }

  // Fisher-Yates, high index downwards.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(next_below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

private:
  std::mt19937_64 engine_;
};

}  // namespace bmf
