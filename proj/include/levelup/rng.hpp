#pragma once

#include <cstdint>
#include <span>
#include <string_view>

// Deterministic random streams. std::mt19937 itself is portable, but the
// standard distributions are not specified bit-for-bit across library
// implementations, and pools/metrics must be byte-identical across platforms.
// So the few draws needed here (uniform, bounded int, weighted pick, shuffle)
// are implemented directly on top of xoshiro256++.

namespace levelup {

// FNV-1a, used to fold string keys into seed material.
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class Rng {
public:
  explicit Rng(std::uint64_t seed) {
    for (auto& word : state_) word = splitmix64(seed);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform double in [0, 1), 53 bits of entropy.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be >= 1.
  int uniform_int(int n) {
    const auto bound = static_cast<std::uint64_t>(n);
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return static_cast<int>(v % bound);
  }

  // Index draw proportional to non-negative weights (not all zero).
  int pick_weighted(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    int last_positive = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) last_positive = static_cast<int>(i);
      u -= weights[i];
      if (u < 0.0 && weights[i] > 0.0) return static_cast<int>(i);
    }
    return last_positive;
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_int(static_cast<int>(i)));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t state_[4];
};

// Substream keying: seeds derived from (base, tag, parts...) are stable across
// platforms and independent of evaluation order.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  std::uint64_t h = fnv1a64(tag) ^ (base + 0x9e3779b97f4a7c15ULL);
  return splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t a) {
  std::uint64_t h = derive_seed(base, tag) ^ (a * 0xff51afd7ed558ccdULL + 1);
  return splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t a, std::uint64_t b) {
  std::uint64_t h = derive_seed(base, tag, a) ^ (b * 0xc4ceb9fe1a85ec53ULL + 1);
  return splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                 std::uint64_t a, std::uint64_t b,
                                 std::uint64_t c) {
  std::uint64_t h = derive_seed(base, tag, a, b) ^ (c + 0x2545f4914f6cdd1dULL);
  return splitmix64(h);
}

}  // namespace levelup
