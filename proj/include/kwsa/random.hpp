#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace kwsa {

/// What a derived stream is used for. Part of the stream key, so streams for
/// different purposes never overlap even under the same (run, node).
enum class StreamPurpose : std::uint64_t {
  network = 1,
  noise = 2,
  data = 3,
  graph = 4,
  dataset = 5,
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// Reproducible random stream.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The uniform and normal transforms are implemented here because
/// the std distributions are implementation-defined, and traces must not
/// depend on which standard library the tool was built against.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  /// Counter-based split: hash the root seed with a key path into a fresh
  /// seed. Streams with different keys are statistically independent and
  /// creating one never advances another.
  static RandomStream derive(std::uint64_t root, std::initializer_list<std::uint64_t> key) {
    std::uint64_t h = detail::splitmix64(root);
    for (std::uint64_t k : key) h = detail::splitmix64(h ^ detail::splitmix64(k + 0x632be59bd9b4e019ULL));
    return RandomStream(h);
  }

  static RandomStream derive(std::uint64_t root, std::uint64_t run, std::uint64_t node,
                             StreamPurpose purpose) {
    return derive(root, {run, node, static_cast<std::uint64_t>(purpose)});
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t uniform_index(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do v = engine_();
    while (v >= limit);
    return v % n;
  }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double scale = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * scale;
    has_spare_ = true;
    return u * scale;
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace kwsa
