// Counter-based pseudo-random generator.
//
// Every sampling routine in the library receives an Rng explicitly; nothing
// reads global state. A generator is a (key, counter) pair, so independent
// streams are cheap: stream(i) derives a new key and starts its counter at
// zero. Two streams derived from distinct indices never share outputs in
// practice, which is what the deterministic CLI contract relies on.
#pragma once

#include "joinsketch/common.hpp"

namespace joinsketch {

class Rng {
 public:
  explicit Rng(u64 seed) : key_(mix64(mix64(seed) ^ 0xa5a5a5a5a5a5a5a5ULL)) {}

  // Derived stream: independent of this generator's future output.
  Rng stream(u64 idx) const {
    Rng r(0);
    r.key_ = mix64(key_ ^ mix64(idx ^ 0x1234567890abcdefULL));
    r.ctr_ = 0;
    return r;
  }

  u64 next() { return mix64(key_ + ctr_++ * 0x9e3779b97f4a7c15ULL); }

  // Uniform over [0, n). Rejection keeps the draw exactly uniform.
  u64 below(u64 n) {
    if (n == 0) raise(ErrorKind::out_of_range, "Rng::below(0)");
    u64 threshold = (0 - n) % n;
    for (;;) {
      u64 r = next();
      if (r >= threshold) return r % n;
    }
  }

  // Uniform over [lo, hi], both ends inclusive. lo <= hi required.
  u64 range(u64 lo, u64 hi) {
    if (lo > hi) raise(ErrorKind::out_of_range, "Rng::range: lo > hi");
    u64 span = hi - lo + 1;
    if (span == 0) return next();  // full 64-bit range
    return lo + below(span);
  }

  // Uniform over [0, n) for 128-bit n > 0.
  u128 below128(u128 n) {
    if (n == 0) raise(ErrorKind::out_of_range, "Rng::below128(0)");
    u128 threshold = (u128(0) - n) % n;
    for (;;) {
      u128 r = (u128(next()) << 64) | next();
      if (r >= threshold) return r % n;
    }
  }

  // Uniform real in [0, 1) with 53 random bits.
  double uniform01() { return double(next() >> 11) * 0x1.0p-53; }

  // Bernoulli with probability p (clamped to [0, 1]).
  bool chance(double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return uniform01() < p;
  }

 private:
  u64 key_;
  u64 ctr_ = 0;
};

}  // namespace joinsketch
