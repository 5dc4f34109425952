#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace jamdet {

/// splitmix64 step; used to derive independent sub-seeds from one campaign seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Deterministic sub-seed for the index-th child of a parent seed.
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t index) {
  std::uint64_t s = parent ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
  return splitmix64(s);
}

/// Seeded random source with explicit, implementation-independent draw
/// formulas (std::*_distribution output is not pinned by the standard,
/// which would break bit-reproducibility guarantees).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1].
  double uniform_pos() { return static_cast<double>((engine_() >> 11) + 1) * 0x1.0p-53; }

  /// Standard normal via Box-Muller (two engine draws per call, no caching).
  double gauss() {
    const double u1 = uniform_pos();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double gauss(double mean, double stddev) { return mean + stddev * gauss(); }

  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    return std::min<std::size_t>(static_cast<std::size_t>(uniform() * static_cast<double>(n)),
                                 n - 1);
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  /// k distinct indices from [0, n), ascending.
  std::vector<int> sample_indices(std::size_t n, std::size_t k) {
    std::vector<int> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<int>(i);
    for (std::size_t i = 0; i < k && i < n; ++i) {
      std::swap(pool[i], pool[i + index(n - i)]);
    }
    pool.resize(std::min(k, n));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace jamdet
