#pragma once
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace setgen {

// Deterministic random stream. Everything downstream (sampling, init, data
// generation) draws through this wrapper so results are reproducible across
// platforms: mt19937_64 output is pinned by the standard, and all variate
// transforms are spelled out here instead of relying on libstdc++
// distributions (whose algorithms are implementation-defined).
//
// Streams: Rng(seed, k) for distinct k are treated as independent; workers and
// pipeline stages each get their own stream index.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::uint64_t a = mix64(seed + 0x9e3779b97f4a7c15ULL);
    std::uint64_t b = mix64(a ^ mix64(stream + 0x632be59bd9b4e019ULL));
    gen_.seed(b);
  }

  std::uint64_t next_u64() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; the sine mate is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    double u2 = uniform();
    double rad = std::sqrt(-2.0 * std::log(u1));
    double ang = kTwoPi * u2;
    spare_ = rad * std::sin(ang);
    have_spare_ = true;
    return rad * std::cos(ang);
  }

  double exponential() { return -std::log(1.0 - uniform()); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t bounded(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("bounded: n must be positive");
    std::uint64_t x, r;
    do {
      x = gen_();
      r = x % n;
    } while (x - r > UINT64_MAX - n + 1);
    return r;
  }

  // Index draw proportional to non-negative weights (need not be normalized).
  int categorical(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) {
      if (!(x >= 0.0) || !std::isfinite(x))
        throw std::invalid_argument("categorical: weights must be finite and >= 0");
      total += x;
    }
    if (total <= 0.0) throw std::invalid_argument("categorical: zero total mass");
    double u = uniform() * total;
    double acc = 0.0;
    int last = -1;
    for (std::size_t i = 0; i < w.size(); ++i) {
      if (w[i] <= 0.0) continue;
      last = static_cast<int>(i);
      acc += w[i];
      if (u < acc) return last;
    }
    return last;  // floating-point residue lands on the final positive weight
  }

  // In-place Fisher-Yates (std::shuffle is implementation-defined).
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = bounded(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static constexpr double kTwoPi = 6.283185307179586476925286766559;

  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace setgen
