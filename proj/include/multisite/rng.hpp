#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace mst {

// 64-bit mixing finalizer (splitmix64). Used both for seeding and for
// deriving independent stream ids from structured keys.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// pcg64 (PCG-XSL-RR 128/64, oneseq stream). One instance per logical
// stream; streams never share state, so replications can run in parallel
// and still be reproducible run to run.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed) {
    state_ = (static_cast<u128>(mix64(seed)) << 64) | mix64(seed ^ kInitMix);
    next_u64();
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~0ULL; }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64() {
    state_ = state_ * kMult + kInc;
    std::uint64_t xored = static_cast<std::uint64_t>(state_ >> 64) ^
                          static_cast<std::uint64_t>(state_);
    int rot = static_cast<int>(state_ >> 122);
    return (xored >> rot) | (xored << ((-rot) & 63));
  }

  // Uniform on (0,1): 53-bit mantissa, never exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller without the cached spare; keeps the stream position a pure
  // function of the number of variates drawn.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double exponential() { return -std::log(uniform()); }

  // Marsaglia-Tsang for shape >= 1, with the usual boost for shape < 1.
  // Parameterized by shape and RATE.
  double gamma(double shape, double rate) {
    if (shape < 1.0) {
      double u = uniform();
      return gamma(shape + 1.0, rate) * std::pow(u, 1.0 / shape);
    }
    double d = shape - 1.0 / 3.0;
    double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      double u = uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return d * v / rate;
      }
    }
  }

  double beta(double a, double b) {
    double x = gamma(a, 1.0);
    double y = gamma(b, 1.0);
    return x / (x + y);
  }

  // Index in [0, n) proportional to weights[i]; total > 0 assumed.
  template <class Vec>
  std::size_t categorical(const Vec& weights, double total) {
    double u = uniform() * total;
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      last = i;
      if (u <= acc) return i;
    }
    return last;  // guards against roundoff on the final edge
  }

 private:
  using u128 = unsigned __int128;
  static constexpr std::uint64_t kInitMix = 0xda3e39cb94b95bdbULL;
  static constexpr u128 kMult =
      (static_cast<u128>(2549297995355413924ULL) << 64) | 4865540595714422341ULL;
  static constexpr u128 kInc =
      (static_cast<u128>(6364136223846793005ULL) << 64) | 1442695040888963407ULL;
  u128 state_;
};

// Collision-free stream derivation for campaign work units. Chained
// mixing means changing any key component yields an unrelated stream, so
// adding scenarios or reps never perturbs existing runs.
inline std::uint64_t derive_stream(std::uint64_t master_seed,
                                   std::string_view scenario_id,
                                   std::uint64_t rep, std::uint64_t stage) {
  std::uint64_t s = mix64(master_seed);
  s = mix64(s ^ fnv1a64(scenario_id));
  s = mix64(s ^ rep);
  s = mix64(s ^ (stage * 0x9e3779b97f4a7c15ULL));
  return s;
}

}  // namespace mst
