#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace shb {

/// What a random stream is used for. Part of the stream key, so streams for
/// different purposes at the same (seed, iteration) never overlap.
enum class Purpose : std::uint64_t {
  Init = 1,
  GradientNoise = 2,
  FunctionNoise = 3,
  Mask = 4,
  Rademacher = 5,
  Sampling = 6,
  Trial = 7,
};

namespace detail {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based random stream: output k is a bijective mix of (key, k).
///
/// A stream is a plain value. Copying it forks an identical sequence, and
/// `derive`/`split` give disjoint streams keyed by integers, so a run's
/// randomness is a pure function of (seed, iteration, purpose). Only integer
/// arithmetic and IEEE sqrt/log are used, so sequences do not depend on the
/// standard library's distribution implementations.
class Stream {
 public:
  constexpr Stream() = default;
  explicit constexpr Stream(std::uint64_t key) : key_(key) {}

  static constexpr Stream derive(std::uint64_t seed, std::uint64_t index, Purpose purpose) {
    std::uint64_t k = detail::mix64(seed + detail::kGolden);
    k = detail::mix64(k ^ (index * 0xD1B54A32D192ED03ULL + 0x8CB92BA72F3D8DD7ULL));
    k = detail::mix64(k ^ (static_cast<std::uint64_t>(purpose) * 0xA0761D6478BD642FULL));
    return Stream(k);
  }

  /// Child stream for sub-index `index`; independent of this stream's position.
  constexpr Stream split(std::uint64_t index) const {
    return Stream(detail::mix64(key_ ^ detail::mix64(index + 0x632BE59BD9B4E019ULL)));
  }

  constexpr std::uint64_t next_u64() {
    ++counter_;
    return detail::mix64(key_ + counter_ * detail::kGolden);
  }

  /// Uniform on [0, 1) with 53 random bits.
  constexpr double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    double v = 0.0;
    double s = 0.0;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  /// Uniform integer in [0, n), unbiased (Lemire's multiply-and-reject).
  constexpr std::uint64_t index(std::uint64_t n) {
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(next_u64()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  constexpr bool bernoulli(double p) { return uniform() < p; }

  constexpr double rademacher() { return (next_u64() >> 63) != 0 ? 1.0 : -1.0; }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t position() const { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace shb
