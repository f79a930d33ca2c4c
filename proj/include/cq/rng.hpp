#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cq::rng {

// splitmix64 finalizer; good enough to derive independent stream seeds.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr uint64_t tag(const char* s) {
  uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  while (*s) {
    h ^= static_cast<uint64_t>(*s++);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t mix(uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
uint64_t mix(uint64_t seed, uint64_t head, Rest... rest) {
  return mix(splitmix64(seed ^ splitmix64(head)), rest...);
}

// Deterministic random stream. Distributions are implemented by hand on top
// of mt19937_64 so that draws are identical regardless of the standard
// library in use.
class Stream {
 public:
  explicit Stream(uint64_t seed) : gen_(seed) {}

  template <typename... Tags>
  static Stream of(uint64_t seed, Tags... tags) {
    return Stream(mix(seed, static_cast<uint64_t>(tags)...));
  }

  uint64_t next_u64() { return gen_(); }

  // uniform in [0, 1) with 53-bit resolution
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [lo, hi] inclusive
  int64_t uniform_int(int64_t lo, int64_t hi) {
    assert(hi >= lo);
    uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    // rejection sampling to avoid modulo bias
    uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    uint64_t v;
    do {
      v = gen_();
    } while (v >= limit);
    return lo + static_cast<int64_t>(v % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal via Box-Muller
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Fisher-Yates permutation of [0, n)
  std::vector<int64_t> permutation(int64_t n) {
    std::vector<int64_t> p(n);
    for (int64_t i = 0; i < n; ++i) p[i] = i;
    for (int64_t i = n - 1; i > 0; --i) {
      int64_t j = uniform_int(0, i);
      std::swap(p[i], p[j]);
    }
    return p;
  }

  // k distinct indices drawn from [0, n), in draw order
  std::vector<int64_t> sample_without_replacement(int64_t n, int64_t k) {
    assert(k <= n);
    // partial Fisher-Yates over a lazily materialized identity map
    std::vector<int64_t> pool(n);
    for (int64_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<int64_t> out(k);
    for (int64_t i = 0; i < k; ++i) {
      int64_t j = uniform_int(i, n - 1);
      std::swap(pool[i], pool[j]);
      out[i] = pool[i];
    }
    return out;
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace cq::rng
