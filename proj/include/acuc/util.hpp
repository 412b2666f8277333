#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace acuc {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Smoothed |x| and max(x,0). eps == 0 selects the hard forms; the hard
// derivative at the kink is 0 (limit of the soft form from below).
inline double soft_abs(double x, double eps) {
  if (eps == 0.0) return std::abs(x);
  return std::sqrt(x * x + eps * eps);
}

inline double soft_abs_grad(double x, double eps) {
  if (eps == 0.0) return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
  return x / std::sqrt(x * x + eps * eps);
}

inline double soft_relu(double x, double eps) {
  double m = std::max(x, 0.0);
  if (eps == 0.0) return m;
  return std::sqrt(m * m + eps * eps);
}

inline double soft_relu_grad(double x, double eps) {
  if (x <= 0.0) return 0.0;
  if (eps == 0.0) return 1.0;
  return x / std::sqrt(x * x + eps * eps);
}

inline double clip(double x, double lo, double hi) {
  return std::min(std::max(x, lo), hi);
}

// splitmix64; used to expand seeds into xoshiro state.
inline std::uint64_t splitmix64(std::uint64_t& s) {
  std::uint64_t z = (s += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// xoshiro256** — deterministic across platforms, unlike std:: distributions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& w : state_) w = splitmix64(s);
  }

  std::uint64_t next_u64() {
    auto rotl = [](std::uint64_t x, int k) {
      return (x << k) | (x >> (64 - k));
    };
    std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [lo, hi] inclusive
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(next_u64() % span);
  }

 private:
  std::uint64_t state_[4];
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace acuc
