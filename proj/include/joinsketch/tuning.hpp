// Budget formulas for the empty-result timeout strategy.
//
// Expected sampler and counter costs are worst at OUT = 1 and only fall as
// OUT grows, so the engines run under a budget of roughly twice the OUT = 1
// cost; exhausting it across the restart rounds is reported as an empty
// result. The scale constants were calibrated once against the verification
// suite (measured OUT = 1 op counts, then doubled and rounded up to a power
// of two) and are deliberately generous: a false empty verdict only happens
// when an instance costs more than twice the analytic worst case.
#pragma once

#include <cmath>

#include "joinsketch/common.hpp"

namespace joinsketch {

struct SampleBudget {
  u64 ops_per_round = 0;
  u32 rounds = 1;
};

// Per-trial op cost times expected OUT = 1 trial count, doubled.
inline constexpr u64 kSamplerOpsPerRow = 64;

// Multiplies N * ln(N/delta) * ln(2/delta) / eps^3 for the hybrid counters.
// The eps exponent matches the trial-count growth of the inner ladders
// (eps' = eps/5 appears cubed at the threshold floor).
inline constexpr u64 kCounterBudgetScale = 131072;

// Restart rounds: ceil(log2 N) + ceil(log2 1/delta).
inline u32 restart_rounds(u64 n, double delta) {
  u32 r = 1;
  u64 v = n;
  while (v > 1) {
    v >>= 1;
    ++r;
  }
  double d = std::max(delta, 1e-12);
  r += u32(std::ceil(std::log2(1.0 / d)));
  return r;
}

inline SampleBudget default_sample_budget(u64 n, double delta = 1.0 / 1024) {
  SampleBudget b;
  b.ops_per_round = kSamplerOpsPerRow * std::max<u64>(n, 1);
  b.rounds = restart_rounds(std::max<u64>(n, 1), delta);
  return b;
}

inline u64 counter_budget(u64 n, double eps, double delta) {
  double nn = double(std::max<u64>(n, 2));
  double d = std::max(delta, 1e-9);
  double v = double(kCounterBudgetScale) * nn * std::log(nn / d) *
             std::log(2.0 / d) / (eps * eps * eps);
  if (v > 9e18) return u64(9e18);
  return u64(v) + 1;
}

// Star ladders pay a floor cost per rung that scales with Lambda^{-1/k}
// rather than the matrix's Lambda^{-1/2}, so certifying empty sides costs
// roughly k-1 times more across the rung sum. k = 2 matches the matrix
// budget exactly.
inline u64 counter_budget_star(u64 n, u32 k, double eps, double delta) {
  u64 base = counter_budget(n, eps, delta);
  u64 scale = k > 2 ? k - 1 : 1;
  if (base > u64(9e18) / scale) return u64(9e18);
  return base * scale;
}

}  // namespace joinsketch
