#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace absf {

/// Independent mt19937_64 stream per (seed, stream tag).
inline std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

/// splitmix64 finaliser; used as a counter-based generator.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Uniform double in (0, 1] from 64 random bits.
constexpr double unit_open(std::uint64_t bits) {
  return static_cast<double>((bits >> 11) + 1) * 0x1.0p-53;
}

/// Small counter-based stream: the k-th draw depends only on (key, k), so
/// draws for one (subframe, group) never shift when other draws change.
class CounterStream {
public:
  explicit constexpr CounterStream(std::uint64_t key) : state_(key) {}
  constexpr std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix64(state_);
  }
  double uniform() { return unit_open(next()); }
  double exponential() { return -std::log(uniform()); }

private:
  std::uint64_t state_;
};

}  // namespace absf
