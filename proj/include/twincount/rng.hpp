#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace twincount {

// splitmix64: seeds streams and mixes keys. Stable across platforms, unlike
// the std:: distributions whose outputs are implementation-defined.
inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and a key, so work
// items (samples, batches, cells) each get their own reproducible stream.
inline uint64_t derive_seed(uint64_t base, uint64_t key) {
  uint64_t s = base ^ (0x632be59bd9b4e019ull + key * 0x9e3779b97f4a7c15ull);
  uint64_t a = splitmix64(s);
  uint64_t b = splitmix64(s);
  return a ^ (b + key);
}

inline uint64_t derive_seed(uint64_t base, uint64_t k1, uint64_t k2) {
  return derive_seed(derive_seed(base, k1), k2);
}

// xoshiro256++ with explicit distributions; bit-reproducible everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) { reseed(seed); }

  void reseed(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
    have_spare_ = false;
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // integer in [lo, hi], inclusive
  int uniform_int(int lo, int hi) {
    const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
    const uint64_t v = static_cast<uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * range) >> 64);
    return lo + static_cast<int>(v);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal via Box-Muller; caches the spare value
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  std::array<uint64_t, 4> state() const { return s_; }
  void set_state(const std::array<uint64_t, 4>& s) {
    s_ = s;
    have_spare_ = false;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  std::array<uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace twincount
