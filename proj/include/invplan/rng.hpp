#pragma once

// Counter-based deterministic RNG (SplitMix64 finalizer over a keyed counter).
// Same seed + same draw sequence => bit-identical streams on every platform,
// which is what makes experiment reports reproducible. Child streams for
// parallel shards are derived from (seed, shard index).

#include <cmath>
#include <cstdint>
#include <vector>

namespace invplan {

namespace detail {
inline std::uint64_t splitmix64_finalize(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}
} // namespace detail

class Rng {
public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(detail::splitmix64_finalize(seed ^ (0xD1B54A32D192ED03ull * (stream + 1)))) {}

  std::uint64_t next_u64() { return detail::splitmix64_finalize(key_ + 0x9E3779B97F4A7C15ull * ++ctr_); }

  // uniform in [0,1)
  double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

  // uniform integer in [0, n)
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
  }

  double normal() {
    double u = 0.0;
    while (u == 0.0) u = u01();
    double v = u01();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
  }

  std::vector<double> uniform_box(const std::vector<double>& lo, const std::vector<double>& hi) {
    std::vector<double> x(lo.size());
    for (std::size_t i = 0; i < lo.size(); ++i) x[i] = uniform(lo[i], hi[i]);
    return x;
  }

  // unit vector, uniform on S^{d-1}
  std::vector<double> unit_vector(int d) {
    std::vector<double> x(d);
    double n2 = 0.0;
    do {
      n2 = 0.0;
      for (int i = 0; i < d; ++i) {
        x[i] = normal();
        n2 += x[i] * x[i];
      }
    } while (n2 == 0.0);
    double inv = 1.0 / std::sqrt(n2);
    for (int i = 0; i < d; ++i) x[i] *= inv;
    return x;
  }

  static Rng child(std::uint64_t seed, std::uint64_t shard) { return Rng(seed, shard + 1); }

private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

} // namespace invplan
