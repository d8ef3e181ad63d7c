#ifndef DIRGRPO_RNG_HPP_
#define DIRGRPO_RNG_HPP_

// Counter-based random streams. Every draw is a pure function of
// (key, counter), so results do not depend on generation order or on the
// standard library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

namespace dirgrpo {

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  // SplitMix64 finalizer
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Folds a list of identifiers into one stream key.
inline constexpr std::uint64_t stream_key(std::initializer_list<std::uint64_t> ids) noexcept {
  std::uint64_t h = 0x6a09e667f3bcc909ULL;
  for (auto id : ids) {
    h = mix64(h ^ mix64(id + 0x9e3779b97f4a7c15ULL));
  }
  return h;
}

/// Stateless draw: the i-th 64-bit word of stream `key`.
inline constexpr std::uint64_t draw_u64(std::uint64_t key, std::uint64_t i) noexcept {
  return mix64(key + (i + 1) * 0x9e3779b97f4a7c15ULL);
}

/// Maps 53 high bits to [0, 1).
inline constexpr double to_unit(std::uint64_t bits) noexcept {
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Standard normal from two stream words (Box-Muller, cosine branch).
inline double draw_normal(std::uint64_t key, std::uint64_t i) noexcept {
  double u1 = to_unit(draw_u64(key, 2 * i));
  const double u2 = to_unit(draw_u64(key, 2 * i + 1));
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Sequential view over one counter-based stream.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() noexcept { return draw_u64(key_, counter_++); }
  double uniform() noexcept { return to_unit(next_u64()); }

  double normal() noexcept {
    const double z = draw_normal(key_, counter_);
    ++counter_;
    return z;
  }

  /// Unbiased integer in [0, n) by rejection.
  std::uint64_t below(std::uint64_t n) noexcept {
    if (n <= 1) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Independent child stream.
  RngStream fork(std::uint64_t id) const noexcept { return RngStream(stream_key({key_, id})); }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

/// Fisher-Yates shuffle driven by `rng`.
template <typename T>
void shuffle(std::span<T> items, RngStream& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

}  // namespace dirgrpo

#endif  // DIRGRPO_RNG_HPP_
