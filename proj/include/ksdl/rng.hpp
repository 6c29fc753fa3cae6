#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace ksdl {

/// Counter-based deterministic generator with cheap stream splitting.
///
/// The output sequence is a SplitMix-style bijective mix of key + counter,
/// so a stream is fully described by its 64-bit key.  child(i) derives the
/// key of an independent stream; results do not depend on how many draws
/// the parent has made.  Every sampled object in the library records the
/// key that produced it, which makes reruns byte-identical.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  static RngStream from_seed(std::uint64_t seed) {
    return RngStream(mix(seed ^ 0x6a09e667f3bcc909ull));
  }

  /// Independent stream addressed by index, regardless of parent state.
  RngStream child(std::uint64_t index) const {
    return RngStream(mix(key_ ^ mix(index + 0x9e3779b97f4a7c15ull)));
  }

  std::uint64_t key() const { return key_; }

  std::uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ull;
    return mix(key_ + counter_);
  }

  /// Uniform draw from [0, 1) with 53-bit resolution.
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  /// -1 or +1 with equal probability.
  double rademacher() { return (next_u64() >> 63) ? 1.0 : -1.0; }

  /// Standard normal via Box-Muller (one value per pair of uniforms).
  double normal() {
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps the log finite
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Unbiased draw from {0, ..., n-1}.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("RngStream::below: n == 0");
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x = next_u64();
    while (x >= limit) x = next_u64();
    return x % n;
  }

  /// Sorted sample of `count` distinct indices from {0, ..., n-1}.
  std::vector<int> sample_without_replacement(int n, int count) {
    if (count < 0 || n < 0 || count > n)
      throw std::invalid_argument("sample_without_replacement: bad sizes");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < count; ++i) {
      const int j = i + static_cast<int>(below(static_cast<std::uint64_t>(n - i)));
      std::swap(pool[i], pool[j]);
    }
    std::vector<int> out(pool.begin(), pool.begin() + count);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

}  // namespace ksdl
