#pragma once

// Counter-based, splittable random streams. Every draw is addressed by a key
// (seed, path, agent, role[, step]), so per-agent idiosyncratic draws and the
// shared common-noise draw come from independent streams and results do not
// depend on evaluation order or degree of parallelism.

#include <cmath>
#include <cstdint>
#include <numbers>

namespace relperf::rng {

enum class Role : std::uint64_t {
  Idiosyncratic = 1,
  Common = 2,
  TypeDraw = 3,
  Replication = 4,
};

namespace detail {

// splitmix64 output function
inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

inline constexpr std::uint64_t absorb(std::uint64_t h, std::uint64_t v) {
  return mix64((h + kGamma) ^ v);
}

}  // namespace detail

inline constexpr std::uint64_t kNoAgent = ~0ULL;

inline constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t path,
                                          std::uint64_t agent, Role role,
                                          std::uint64_t step = 0) {
  std::uint64_t h = detail::mix64(seed + detail::kGamma);
  h = detail::absorb(h, path);
  h = detail::absorb(h, agent);
  h = detail::absorb(h, static_cast<std::uint64_t>(role));
  h = detail::absorb(h, step);
  return h;
}

/// A small keyed stream (splitmix64 sequence starting at the key).
class Stream {
 public:
  explicit constexpr Stream(std::uint64_t key) : state_(key) {}

  constexpr std::uint64_t next_u64() {
    state_ += detail::kGamma;
    return detail::mix64(state_);
  }

  /// Uniform draw in (0,1].
  double next_unit() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  /// Standard normal draw (Box-Muller, cosine branch).
  double next_normal() {
    const double u = next_unit();
    const double v = next_unit();
    return std::sqrt(-2.0 * std::log(u)) *
           std::cos(2.0 * std::numbers::pi * v);
  }

 private:
  std::uint64_t state_;
};

/// Single standard-normal draw for a key.
inline double normal(std::uint64_t key) { return Stream(key).next_normal(); }

/// Single uniform (0,1] draw for a key.
inline double unit(std::uint64_t key) { return Stream(key).next_unit(); }

/// Derived seed for an independent replication stream.
inline constexpr std::uint64_t replication_seed(std::uint64_t seed,
                                                std::uint64_t replication) {
  return stream_key(seed, replication, kNoAgent, Role::Replication);
}

}  // namespace relperf::rng
