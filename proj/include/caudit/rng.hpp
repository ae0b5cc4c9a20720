#pragma once

#include <cstdint>
#include <string_view>

namespace caudit {

// Counter-based pseudorandom streams. A stream is addressed by a key derived
// from the master seed plus an arbitrary list of tags (indices, labels), so
// any (persona, advertiser, visit) combination owns an independent stream
// regardless of the order in which streams are consumed. splitmix64 output
// function; each draw is a pure function of (key, counter).
class RandomStream {
 public:
  explicit RandomStream(uint64_t key) : key_(key) {}

  uint64_t next_u64() { return mix(key_ + kGamma * ++counter_); }

  // Uniform in [0, 1) with 53 random bits.
  double next_uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_uniform(); }

  // Standard normal via inverse-CDF; deterministic, one draw per call.
  double next_normal();

  // Uniform integer in [0, n).
  uint64_t next_below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  static uint64_t mix(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ULL;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebULL;
    x ^= x >> 31;
    return x;
  }

 private:
  static constexpr uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  uint64_t key_;
  uint64_t counter_ = 0;
};

// Key derivation: fold tags into the seed one by one. Strings hash via FNV-1a
// so label changes produce unrelated streams.
class StreamKey {
 public:
  explicit StreamKey(uint64_t seed) : h_(RandomStream::mix(seed ^ 0x736f6d6570736575ULL)) {}

  StreamKey& tag(uint64_t v) {
    h_ = RandomStream::mix(h_ ^ (v + 0x9e3779b97f4a7c15ULL));
    return *this;
  }

  StreamKey& tag(std::string_view s) {
    uint64_t f = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      f ^= c;
      f *= 0x100000001b3ULL;
    }
    return tag(f);
  }

  uint64_t value() const { return h_; }
  RandomStream stream() const { return RandomStream(h_); }

 private:
  uint64_t h_;
};

// Inverse of the standard normal CDF (Acklam's rational approximation,
// relative error < 1.2e-9 over (0,1)).
double normal_quantile(double p);

}  // namespace caudit
