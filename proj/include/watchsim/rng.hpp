#pragma once

#include <cmath>
#include <cstdint>

namespace watchsim {

// Counter-based splitmix64 stream. Hand-rolled draws keep every dataset,
// rollout, and fold assignment reproducible across compilers and stdlibs.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  bool next_bernoulli(double p) { return next_double() < p; }

  // Box-Muller; one draw per call, the paired value is discarded.
  double next_gaussian(double mean = 0.0, double sd = 1.0) {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sd * r * std::cos(2.0 * M_PI * u2);
  }

  // Gaussian rejected until >= lower. sd == 0 collapses to max(mean, lower).
  double next_truncated_gaussian(double mean, double sd, double lower) {
    if (sd <= 0.0) return mean < lower ? lower : mean;
    for (int i = 0; i < 256; ++i) {
      double x = next_gaussian(mean, sd);
      if (x >= lower) return x;
    }
    return lower;
  }

  // Knuth's product method; fine for the small lambdas used here.
  int next_poisson(double lambda) {
    if (lambda <= 0.0) return 0;
    double limit = std::exp(-lambda);
    double prod = next_double();
    int n = 0;
    while (prod > limit) {
      prod *= next_double();
      ++n;
    }
    return n;
  }

 private:
  std::uint64_t state_;
};

// Order-independent way to derive substream seeds from (seed, tags...).
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  a ^= b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2);
  return a;
}

template <typename... Rest>
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, Rest... rest) {
  return mix_seed(mix_seed(a, b), rest...);
}

// FNV-1a; stable across platforms, used for item-id bucketing and
// deriving per-user rng streams from opaque string ids.
inline std::uint64_t stable_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace watchsim
