// Hybrid heavy/light approximate counter for the matrix query.
//
// The outer ladder guesses OUT geometrically from N^2 downward. Each guess
// Lambda splits adom(B) at degree sqrt(Lambda): the few heavy values get
// exact per-value join weights, the light remainder is sampled through a
// degree cap. Each side runs its own inner guess ladder at threshold
// tau = eps' Lambda / 16; a round of k_lambda indicator trials scaled by the
// side's full-join bound is an unbiased estimate of the side's output count,
// a median of rounds either validates the inner guess (s >= lambda) or the
// ladder descends, and reaching the floor certifies the side is below tau.
// The two sides are merged with a sampled overlap fraction so results
// reachable through both a heavy and a light b are not double counted.
//
// All repetition-count logarithms are natural logs, ceiled; medians are
// lower medians. Estimates are exact-real doubles, never rounded.
#pragma once

#include <algorithm>
#include <cmath>
#include <optional>

#include "joinsketch/matrix.hpp"
#include "joinsketch/stats.hpp"

namespace joinsketch {

struct HeavySet {
  std::unordered_set<Value, ValueHash> values;
  double threshold = 0.0;  // degree cutoff sqrt(Lambda)
};

// Thrown when a counter exceeds its operation budget; the outermost ladder
// catches it and reports 0, which is the verdict for instances that never
// produce a validating estimate.
struct BudgetExhausted {};

class CounterBudget {
 public:
  // Counts ops from construction time, so one budget covers one counter call
  // even when the engine's counters carry totals from earlier calls.
  CounterBudget(const OpCounters& ops, u64 limit)
      : ops_(&ops), start_(ops.total()), limit_(limit) {}
  // Cheap per-trial guard; the full counter scan runs every 1024 ticks.
  void tick() {
    if ((++ticks_ & 1023) == 0 && ops_->total() - start_ >= limit_)
      throw BudgetExhausted{};
  }
  u64 limit() const { return limit_; }

 private:
  const OpCounters* ops_;
  u64 start_;
  u64 limit_;
  u64 ticks_ = 0;
};

// Samples ceil(N ln(N/delta) / sqrt(Lambda)) rows of R2 and keeps the b
// values whose degree verifiably exceeds sqrt(Lambda). The verification step
// makes the output sound on every run; completeness holds w.p. >= 1-delta.
inline HeavySet detect_heavy(MatrixEngine& eng, double lambda_guess,
                             double delta, Rng& rng) {
  HeavySet hs;
  hs.threshold = std::sqrt(lambda_guess);
  const IndexedRelation& rhs = eng.rhs();
  if (rhs.size() == 0) return hs;
  double n = double(eng.total_rows());
  u64 k = u64(std::ceil(n * std::log(n / delta) / hs.threshold));
  for (u64 i = 0; i < k; ++i) {
    eng.counters().sample_tuple += 1;
    Value b = rhs.row(rhs.sample_row(rng))[eng.rhs_join_slot()];
    if (hs.values.count(b)) continue;
    eng.counters().degree += 1;
    if (double(rhs.degree(eng.rhs_join_slot(), b)) > hs.threshold)
      hs.values.insert(b);
  }
  return hs;
}

// Exact per-value weights over the heavy b's; join_size is the exact
// full-join mass of the heavy side, computed in O(|heavy|) degree probes.
struct HeavyView {
  std::vector<Value> values;
  std::optional<WeightedSampler> sampler;
  u64 join_size = 0;
};

inline HeavyView build_heavy_view(MatrixEngine& eng, const HeavySet& hs) {
  HeavyView view;
  std::vector<u64> weights;
  u128 total = 0;
  for (Value b : hs.values) {
    eng.counters().degree += 2;
    u128 w = u128(eng.lhs().degree(eng.lhs_join_slot(), b)) *
             eng.rhs().degree(eng.rhs_join_slot(), b);
    if (w == 0) continue;
    if (w > u128(~u64(0)))
      raise(ErrorKind::overflow, "heavy per-value weight overflow");
    total += w;
    view.values.push_back(b);
    weights.push_back(u64(w));
  }
  if (total > u128(~u64(0)))
    raise(ErrorKind::overflow, "heavy join size overflow");
  view.join_size = u64(total);
  if (view.join_size > 0) view.sampler.emplace(std::move(weights));
  return view;
}

// One averaging round of the threshold counter: k_lambda indicator trials,
// each success contributing the full-join bound. E[round] = OUT of the view.
template <typename TrialFn>
double threshold_round(double out_bound, u64 k_lambda, TrialFn&& trial,
                       CounterBudget& budget, OpCounters& ops, Rng& rng) {
  u64 z = 0;
  for (u64 j = 0; j < k_lambda; ++j) {
    budget.tick();
    ops.trials += 1;
    if (trial(rng)) {
      ++z;
      ops.accepted += 1;
    }
  }
  return double(z) * out_bound / double(k_lambda);
}

// Inner guess ladder: lambda = lambda0, lambda0/2, ... while lambda >= tau.
// Returns the first lower median of k_delta rounds that validates its guess;
// exhausting the ladder certifies OUT(view) < tau (up to failure prob delta)
// and reports nullopt.
template <typename TrialFn>
std::optional<double> approx_count_with_threshold(double out_bound, double tau,
                                                  double lambda0, double eps,
                                                  double delta, TrialFn&& trial,
                                                  CounterBudget& budget,
                                                  OpCounters& ops, Rng& rng) {
  if (out_bound <= 0.0) return std::nullopt;  // empty view never validates
  u64 k_delta = u64(std::ceil(3.0 * std::log(2.0 / delta)));
  std::vector<double> rounds(k_delta);
  for (double lambda = lambda0; lambda >= tau; lambda /= 2.0) {
    u64 k_lambda = u64(std::ceil(6.0 * out_bound / (eps * eps * lambda)));
    for (u64 i = 0; i < k_delta; ++i)
      rounds[i] = threshold_round(out_bound, k_lambda, trial, budget, ops, rng);
    double s = lower_median(rounds);
    if (s >= lambda) return s;
  }
  return std::nullopt;
}

// Fraction of light results that are also heavy results, from
// ceil(ln(2/delta) / (2 eps^2)) uniform light samples (additive eps error).
// Membership is checked by scanning the heavy b's with two row tests each.
inline double intersect_estimate(MatrixEngine& eng, const HeavySet& hs,
                                 const BPartition& light_part, double cap,
                                 double eps, double delta,
                                 CounterBudget& budget, Rng& rng) {
  if (hs.values.empty()) return 0.0;
  u64 m = u64(std::ceil(std::log(2.0 / delta) / (2.0 * eps * eps)));
  u64 hits = 0;
  for (u64 i = 0; i < m; ++i) {
    JoinTriple s{};
    for (;;) {  // retry to success; the caller saw a light estimate, so
                // the light side is nonempty and this terminates a.s.
      budget.tick();
      eng.counters().trials += 1;
      auto t = eng.counter_light_trial(cap, light_part, rng);
      if (t && eng.accept(*t, rng, &light_part)) {
        eng.counters().accepted += 1;
        s = *t;
        break;
      }
    }
    for (Value b : hs.values) {
      budget.tick();
      if (eng.is_join_triple({s.a, b, s.c})) {
        ++hits;
        break;
      }
    }
  }
  return double(hits) / double(m);
}

// One estimate conditioned on the guess Lambda. Always E[estimate] <= 2 OUT;
// when Lambda <= 4 OUT the estimate is an eps-approximation w.p. >= 1-delta.
inline double approx_count_matrix_with_guess(MatrixEngine& eng,
                                             double lambda_guess, double eps,
                                             double delta,
                                             CounterBudget& budget, Rng& rng) {
  double eps_p = eps / 5.0;
  HeavySet hs = detect_heavy(eng, lambda_guess, delta / 4.0, rng);
  HeavyView heavy = build_heavy_view(eng, hs);
  BPartition heavy_part{&hs.values, true};
  BPartition light_part{&hs.values, false};
  double n = double(eng.total_rows());
  double cap = std::sqrt(lambda_guess);
  double tau = eps_p * lambda_guess / 16.0;
  double lambda0 = n * n;

  auto heavy_trial = [&](Rng& r) {
    JoinTriple t = eng.sample_join_from(*heavy.sampler, heavy.values, r);
    return eng.accept(t, r, &heavy_part);
  };
  auto light_trial = [&](Rng& r) {
    auto t = eng.counter_light_trial(cap, light_part, r);
    return t && eng.accept(*t, r, &light_part);
  };

  // Heavy side: bound is the exact heavy join size. Light side: every R1 row
  // extends to at most cap partners, so N * cap bounds its full join.
  auto s_h = approx_count_with_threshold(double(heavy.join_size), tau, lambda0,
                                         eps_p, delta / 4.0, heavy_trial,
                                         budget, eng.counters(), rng);
  auto s_l =
      approx_count_with_threshold(n * cap, tau, lambda0, eps_p, delta / 4.0,
                                  light_trial, budget, eng.counters(), rng);
  if (s_h && s_l) {
    double beta = intersect_estimate(eng, hs, light_part, cap, eps_p,
                                     delta / 4.0, budget, rng);
    return *s_h + *s_l - std::min(*s_h, *s_l * beta);
  }
  if (s_h) return *s_h;
  if (s_l) return *s_l;
  return 0.0;
}

// Outer ladder: Lambda = N^2, N^2/2, ..., 1; per guess, the lower median of
// ceil(ln(2/delta)) conditioned estimates; the first median validating its
// guess is the answer. The final rung's median is returned unconditionally:
// Lambda = 1 <= 4 OUT holds for every nonempty result set, so that median
// already carries the accuracy guarantee, and demanding s >= 1 there would
// zero out OUT = 1 instances whenever the estimate lands a hair below one.
// True empty results give identically-zero medians, so 0 still means empty.
// Budget exhaustion also reports 0.
inline double approx_count_matrix(MatrixEngine& eng,
                                  const EstimatorParams& params, Rng& rng) {
  check_estimator_params(params);
  if (eng.lhs().size() == 0 || eng.rhs().size() == 0) return 0.0;
  double n = double(eng.total_rows());
  u64 k = u64(std::ceil(std::log(2.0 / params.delta)));
  CounterBudget budget(
      eng.counters(),
      counter_budget(eng.total_rows(), params.epsilon, params.delta));
  std::vector<double> reps(k);
  try {
    for (double lam = n * n; lam >= 1.0; lam /= 2.0) {
      for (u64 i = 0; i < k; ++i)
        reps[i] = approx_count_matrix_with_guess(eng, lam, params.epsilon,
                                                 params.delta / 2.0, budget, rng);
      double s = lower_median(reps);
      if (s >= lam || lam < 2.0) return s;
    }
  } catch (const BudgetExhausted&) {
  }
  return 0.0;
}

inline double approx_count_matrix(const Instance& inst, const QuerySpec& spec,
                                  const EstimatorParams& params, Rng& rng) {
  MatrixEngine eng(inst, spec);
  return approx_count_matrix(eng, params, rng);
}

}  // namespace joinsketch
