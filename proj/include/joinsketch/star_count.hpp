// Hybrid heavy/light approximate counter for k-star queries.
//
// Same ladder scheme as the matrix counter with the cut moved to the
// per-center full-join weight: under guess Lambda, b is heavy when
// W_b = prod_i |R_i ⋉ b| exceeds Delta = Lambda^{(k-1)/k}. The heavy side
// gets exact restricted weights; the light side is sampled through R_1 with
// the smoothing ratio E_b / Delta, E_b = prod_{i>=2} |R_i ⋉ b|, so every
// light full-join tuple lands with probability exactly 1/(N * Delta) and
// N * Delta bounds the light full-join mass. Detection draws rows from the
// union of all k relations: a heavy b has max_i |R_i ⋉ b| >= W_b^{1/k} >
// Lambda^{(k-1)/k^2}, so ceil(N ln(N/delta) / Lambda^{(k-1)/k^2}) draws
// surface every heavy value w.p. >= 1-delta, and each candidate is verified
// with k degree probes before it enters the set. Inner ladders, the overlap
// combiner, and the outer guess ladder are the matrix ones, with N^2
// replaced by N^k as the output ceiling.
#pragma once

#include "joinsketch/matrix_count.hpp"
#include "joinsketch/star.hpp"

namespace joinsketch {

inline HeavySet detect_heavy_star(StarEngine& eng, double lambda_guess,
                                  double delta, Rng& rng) {
  HeavySet hs;
  double kk = double(eng.k());
  hs.threshold = std::pow(lambda_guess, (kk - 1.0) / kk);
  if (eng.total_rows() == 0) return hs;
  double n = double(eng.total_rows());
  double hit = std::pow(lambda_guess, (kk - 1.0) / (kk * kk));
  u64 draws = u64(std::ceil(n * std::log(n / delta) / hit));
  for (u64 i = 0; i < draws; ++i) {
    Value b = eng.random_center_value(rng);
    if (hs.values.count(b)) continue;
    if (double(eng.center_weight(b)) > hs.threshold) hs.values.insert(b);
  }
  return hs;
}

// Exact restricted weights over the heavy b's; join_size is the exact
// full-join mass of the heavy side, at k degree probes per value.
inline HeavyView build_heavy_view_star(StarEngine& eng, const HeavySet& hs) {
  HeavyView view;
  std::vector<u64> weights;
  u128 total = 0;
  for (Value b : hs.values) {
    u128 w = eng.center_weight(b);
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

// Fraction of light results that are also heavy results, from
// ceil(ln(2/delta) / (2 eps^2)) uniform light samples (additive eps error).
// Membership is checked by scanning the heavy b's with k row tests each.
inline double intersect_estimate_star(StarEngine& eng, const HeavySet& hs,
                                      const BPartition& light_part, double cap,
                                      double eps, double delta,
                                      CounterBudget& budget, Rng& rng) {
  if (hs.values.empty()) return 0.0;
  u64 m = u64(std::ceil(std::log(2.0 / delta) / (2.0 * eps * eps)));
  u64 hits = 0;
  for (u64 i = 0; i < m; ++i) {
    StarCandidate s{};
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
      if (eng.connects(s.a, b)) {
        ++hits;
        break;
      }
    }
  }
  return double(hits) / double(m);
}

// One estimate conditioned on the guess Lambda. Always E[estimate] <= 2 OUT;
// when Lambda <= 4 OUT the estimate is an eps-approximation w.p. >= 1-delta.
inline double approx_count_star_with_guess(StarEngine& eng, double lambda_guess,
                                           double eps, double delta,
                                           CounterBudget& budget, Rng& rng) {
  double eps_p = eps / 5.0;
  HeavySet hs = detect_heavy_star(eng, lambda_guess, delta / 4.0, rng);
  HeavyView heavy = build_heavy_view_star(eng, hs);
  BPartition heavy_part{&hs.values, true};
  BPartition light_part{&hs.values, false};
  double n = double(eng.total_rows());
  double cap = hs.threshold;
  double tau = eps_p * lambda_guess / 16.0;
  double lambda0 = std::pow(n, double(eng.k()));

  auto heavy_trial = [&](Rng& r) {
    StarCandidate t = eng.sample_star_from(*heavy.sampler, heavy.values, r);
    return eng.accept(t, r, &heavy_part);
  };
  auto light_trial = [&](Rng& r) {
    auto t = eng.counter_light_trial(cap, light_part, r);
    return t && eng.accept(*t, r, &light_part);
  };

  auto s_h = approx_count_with_threshold(double(heavy.join_size), tau, lambda0,
                                         eps_p, delta / 4.0, heavy_trial,
                                         budget, eng.counters(), rng);
  auto s_l =
      approx_count_with_threshold(n * cap, tau, lambda0, eps_p, delta / 4.0,
                                  light_trial, budget, eng.counters(), rng);
  if (s_h && s_l) {
    double beta = intersect_estimate_star(eng, hs, light_part, cap, eps_p,
                                          delta / 4.0, budget, rng);
    return *s_h + *s_l - std::min(*s_h, *s_l * beta);
  }
  if (s_h) return *s_h;
  if (s_l) return *s_l;
  return 0.0;
}

// Outer ladder: Lambda = N^k, N^k/2, ..., 1, with the same validation and
// final-rung rules as the matrix counter. Budget exhaustion reports 0.
inline double approx_count_star(StarEngine& eng, const EstimatorParams& params,
                                Rng& rng) {
  check_estimator_params(params);
  for (u32 i = 0; i < eng.k(); ++i)
    if (eng.rel(i).size() == 0) return 0.0;
  double n = double(eng.total_rows());
  u64 k_rep = u64(std::ceil(std::log(2.0 / params.delta)));
  CounterBudget budget(eng.counters(),
                       counter_budget_star(eng.total_rows(), eng.k(),
                                           params.epsilon, params.delta));
  std::vector<double> reps(k_rep);
  try {
    for (double lam = std::pow(n, double(eng.k())); lam >= 1.0; lam /= 2.0) {
      for (u64 i = 0; i < k_rep; ++i)
        reps[i] = approx_count_star_with_guess(eng, lam, params.epsilon,
                                               params.delta / 2.0, budget, rng);
      double s = lower_median(reps);
      if (s >= lam || lam < 2.0) return s;
    }
  } catch (const BudgetExhausted&) {
  }
  return 0.0;
}

inline double approx_count_star(const Instance& inst, const QuerySpec& spec,
                                const EstimatorParams& params, Rng& rng) {
  StarEngine eng(inst, spec);
  return approx_count_star(eng, params, rng);
}

}  // namespace joinsketch
