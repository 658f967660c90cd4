#pragma once

// Deterministic random streams. Every stochastic component draws from its own
// substream derived from (master seed, stream id), so adding draws to one
// component never shifts another component's sequence. Sampling helpers are
// hand-rolled on top of the raw 64-bit output instead of the std distribution
// objects, whose exact draw sequences are implementation-defined.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace cursim {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  static Rng substream(std::uint64_t master, std::uint64_t stream) {
    // splitmix64 over the pair; decorrelates streams that differ in one bit.
    std::uint64_t z = master + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return Rng(z ^ (z >> 31));
  }

  std::uint64_t next() { return gen_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    if (n <= 0) throw std::invalid_argument("uniform_int: n must be positive");
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t bound = ~std::uint64_t{0} - ~std::uint64_t{0} % static_cast<std::uint64_t>(n);
    std::uint64_t v = gen_();
    while (v >= bound) v = gen_();
    return static_cast<int>(v % static_cast<std::uint64_t>(n));
  }

  // Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.28318530717958647692 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Index draw proportional to the (not necessarily normalized) weights.
  int sample(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0 || !std::isfinite(w)) throw std::invalid_argument("sample: weights must be finite and nonnegative");
      total += w;
    }
    if (total <= 0.0) throw std::invalid_argument("sample: weights sum to zero");
    const double u = uniform01() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  // k distinct indices from [0, n), uniform over subsets, returned sorted.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k < 0 || k > n) throw std::invalid_argument("sample_without_replacement: need 0 <= k <= n");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i) {
      const int j = i + uniform_int(n - i);
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

  // k distinct indices drawn successively with probability proportional to the
  // remaining weights. Returned in draw order.
  std::vector<int> weighted_sample_without_replacement(std::vector<double> weights, int k) {
    const int n = static_cast<int>(weights.size());
    if (k < 0 || k > n) throw std::invalid_argument("weighted_sample_without_replacement: need 0 <= k <= n");
    std::vector<int> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
      const int idx = sample(weights);
      out.push_back(idx);
      weights[idx] = 0.0;
    }
    return out;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cursim
