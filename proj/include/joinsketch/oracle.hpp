// Ground-truth evaluation and the statistical verification harness.
//
// Two deliberately independent exact evaluators live here. exact_eval joins
// relation by relation through hash indexes; exact_eval_naive enumerates the
// full row-id cross product and filters. Both produce the projected result
// set, the full-join size, and the per-result witness counts, and the test
// suites insist that they agree before any randomized engine is trusted.
#pragma once

#include <functional>
#include <optional>
#include <unordered_map>
#include <vector>

#include "joinsketch/model.hpp"
#include "joinsketch/stats.hpp"

namespace joinsketch {

struct OracleReport {
  u64 out = 0;                                       // |Q(R)|
  u64 out_join = 0;                                  // full-join size
  std::vector<Tuple> results;                        // projected, first-seen order
  std::unordered_map<Tuple, u64, TupleHash> degree;  // witnesses per result
};

namespace detail {

// Positions of each schema attribute inside the global attribute list.
inline std::vector<std::vector<size_t>> global_slots(const QuerySpec& q) {
  std::vector<std::vector<size_t>> out;
  out.reserve(q.relations.size());
  for (const auto& e : q.relations) out.push_back(slots_of(q.attributes, e));
  return out;
}

}  // namespace detail

// Hash-join evaluator. `limit` bounds the intermediate assignment count;
// exceeding it raises overflow (the harness sizes instances to stay below).
inline OracleReport exact_eval(const Instance& inst, const QuerySpec& q,
                               u64 limit = 20'000'000) {
  auto bad = validate_instance(inst, q);
  if (!bad.empty()) raise(ErrorKind::invalid_instance, bad.front());
  size_t n_attr = q.attributes.size();
  auto gslots = detail::global_slots(q);

  // Greedy join order: always extend with a relation sharing an attribute.
  std::vector<size_t> order;
  std::vector<bool> used(q.relations.size(), false);
  std::vector<bool> bound(n_attr, false);
  for (size_t step = 0; step < q.relations.size(); ++step) {
    size_t pick = q.relations.size();
    for (size_t i = 0; i < q.relations.size() && pick == q.relations.size();
         ++i) {
      if (used[i]) continue;
      if (step == 0) pick = i;
      for (size_t s : gslots[i])
        if (bound[s]) pick = i;
    }
    if (pick == q.relations.size())
      for (size_t i = 0; i < q.relations.size(); ++i)
        if (!used[i] && pick == q.relations.size()) pick = i;
    used[pick] = true;
    order.push_back(pick);
    for (size_t s : gslots[pick]) bound[s] = true;
  }

  // Partial assignments over the global attribute vector.
  const Value kUnset{~u64(0) - 7};
  std::vector<Tuple> partials{Tuple(n_attr, kUnset)};
  std::fill(bound.begin(), bound.end(), false);
  for (size_t rel : order) {
    const Relation& r = inst.relations[rel];
    const auto& slots = gslots[rel];
    std::vector<size_t> key_pos;  // positions within the schema, bound already
    for (size_t i = 0; i < slots.size(); ++i)
      if (bound[slots[i]]) key_pos.push_back(i);
    // Bucket the relation rows by the bound-attribute key.
    std::unordered_map<Tuple, std::vector<const Tuple*>, TupleHash> buckets;
    buckets.reserve(r.rows.size() * 2);
    for (const Tuple& t : r.rows) {
      Tuple key;
      key.reserve(key_pos.size());
      for (size_t p : key_pos) key.push_back(t[p]);
      buckets[key].push_back(&t);
    }
    std::vector<Tuple> next;
    for (const Tuple& pa : partials) {
      Tuple key;
      key.reserve(key_pos.size());
      for (size_t p : key_pos) key.push_back(pa[slots[p]]);
      auto it = buckets.find(key);
      if (it == buckets.end()) continue;
      for (const Tuple* t : it->second) {
        Tuple ext = pa;
        for (size_t i = 0; i < slots.size(); ++i) ext[slots[i]] = (*t)[i];
        next.push_back(std::move(ext));
        if (next.size() > limit)
          raise(ErrorKind::overflow, "exact_eval intermediate limit exceeded");
      }
    }
    partials = std::move(next);
    for (size_t s : slots) bound[s] = true;
  }

  OracleReport rep;
  rep.out_join = partials.size();
  auto out_slots = slots_of(q.attributes, q.output);
  rep.degree.reserve(partials.size() * 2);
  for (const Tuple& pa : partials) {
    Tuple res = project(pa, out_slots);
    auto [it, fresh] = rep.degree.emplace(std::move(res), 0);
    it->second += 1;
    if (fresh) rep.results.push_back(it->first);
  }
  rep.out = rep.results.size();
  return rep;
}

// Cross-product evaluator: walks every combination of row ids and keeps the
// consistent ones. Quadratically dumber than exact_eval on purpose.
inline OracleReport exact_eval_naive(const Instance& inst, const QuerySpec& q,
                                     u64 limit = 50'000'000) {
  auto bad = validate_instance(inst, q);
  if (!bad.empty()) raise(ErrorKind::invalid_instance, bad.front());
  size_t n_attr = q.attributes.size();
  auto gslots = detail::global_slots(q);
  u128 combos = 1;
  for (const auto& r : inst.relations) {
    combos *= (r.rows.empty() ? 0 : r.rows.size());
    if (combos > limit)
      raise(ErrorKind::overflow, "exact_eval_naive combination limit");
  }

  OracleReport rep;
  auto out_slots = slots_of(q.attributes, q.output);
  if (combos == 0) return rep;

  std::vector<size_t> odo(inst.relations.size(), 0);
  const Value kUnset{~u64(0) - 7};
  for (;;) {
    Tuple assign(n_attr, kUnset);
    bool ok = true;
    for (size_t rel = 0; rel < inst.relations.size() && ok; ++rel) {
      const Tuple& t = inst.relations[rel].rows[odo[rel]];
      for (size_t i = 0; i < t.size(); ++i) {
        Value& cell = assign[gslots[rel][i]];
        if (cell == kUnset)
          cell = t[i];
        else if (cell != t[i])
          ok = false;
      }
    }
    if (ok) {
      rep.out_join += 1;
      Tuple res = project(assign, out_slots);
      auto [it, fresh] = rep.degree.emplace(std::move(res), 0);
      it->second += 1;
      if (fresh) rep.results.push_back(it->first);
    }
    size_t d = 0;
    while (d < odo.size()) {
      if (++odo[d] < inst.relations[d].rows.size()) break;
      odo[d] = 0;
      ++d;
    }
    if (d == odo.size()) break;
  }
  rep.out = rep.results.size();
  return rep;
}

// Runs both evaluators and raises on any disagreement.
inline OracleReport oracle_check(const Instance& inst, const QuerySpec& q) {
  OracleReport a = exact_eval(inst, q);
  OracleReport b = exact_eval_naive(inst, q);
  if (a.out != b.out || a.out_join != b.out_join)
    raise(ErrorKind::invalid_instance, "exact evaluators disagree on sizes");
  if (a.degree.size() != b.degree.size())
    raise(ErrorKind::invalid_instance, "exact evaluators disagree on support");
  for (const auto& [t, d] : a.degree) {
    auto it = b.degree.find(t);
    if (it == b.degree.end() || it->second != d)
      raise(ErrorKind::invalid_instance, "exact evaluators disagree on degree");
  }
  return a;
}

// --- sampling uniformity ----------------------------------------------------

struct UniformityReport {
  bool pass = false;
  double stat = 0.0;
  double threshold = 0.0;
  u64 dof = 0;
  u64 samples = 0;
  u64 out_of_set = 0;    // draws outside the oracle support (must stay 0)
  u64 failed_draws = 0;  // draws where the sampler reported empty
  double max_abs_dev = 0.0;
};

// Chi-square uniformity check of `draw` against the oracle support set.
// Any sample outside the support fails the test outright.
inline UniformityReport uniformity_test(
    const std::vector<Tuple>& support,
    const std::function<std::optional<Tuple>()>& draw, u64 n_samples,
    double quantile_p = 0.999) {
  if (support.empty())
    raise(ErrorKind::out_of_range, "uniformity test over empty support");
  std::unordered_map<Tuple, size_t, TupleHash> pos;
  pos.reserve(support.size() * 2);
  for (size_t i = 0; i < support.size(); ++i) pos.emplace(support[i], i);
  std::vector<u64> counts(support.size(), 0);
  UniformityReport rep;
  rep.samples = n_samples;
  for (u64 i = 0; i < n_samples; ++i) {
    auto s = draw();
    if (!s) {
      rep.failed_draws += 1;
      continue;
    }
    auto it = pos.find(*s);
    if (it == pos.end()) {
      rep.out_of_set += 1;
      continue;
    }
    counts[it->second] += 1;
  }
  rep.dof = support.size() - 1;
  rep.stat = chi_square_uniform(counts, n_samples);
  rep.threshold = rep.dof == 0 ? 0.0 : chi_square_quantile(rep.dof, quantile_p);
  double expected = double(n_samples) / double(support.size());
  for (u64 c : counts)
    rep.max_abs_dev =
        std::max(rep.max_abs_dev, std::abs(double(c) - expected) /
                                      double(n_samples));
  rep.pass = rep.out_of_set == 0 && rep.failed_draws == 0 &&
             (rep.dof == 0 || rep.stat < rep.threshold);
  return rep;
}

// Aligned per-cell counts over a fixed support, for two-sample comparisons.
inline std::vector<u64> sample_histogram(
    const std::vector<Tuple>& support,
    const std::function<std::optional<Tuple>()>& draw, u64 n_samples,
    u64* out_of_set = nullptr) {
  std::unordered_map<Tuple, size_t, TupleHash> pos;
  pos.reserve(support.size() * 2);
  for (size_t i = 0; i < support.size(); ++i) pos.emplace(support[i], i);
  std::vector<u64> counts(support.size(), 0);
  u64 miss = 0;
  for (u64 i = 0; i < n_samples; ++i) {
    auto s = draw();
    if (!s) {
      ++miss;
      continue;
    }
    auto it = pos.find(*s);
    if (it == pos.end())
      ++miss;
    else
      counts[it->second] += 1;
  }
  if (out_of_set) *out_of_set = miss;
  return counts;
}

// --- estimator accuracy -----------------------------------------------------

struct AccuracyReport {
  u64 runs = 0;
  u64 within = 0;
  double fraction = 0.0;
  std::vector<double> estimates;
};

inline AccuracyReport accuracy_trials(const std::function<double()>& estimate,
                                      double truth, double epsilon, u64 runs) {
  AccuracyReport rep;
  rep.runs = runs;
  rep.estimates.reserve(runs);
  for (u64 i = 0; i < runs; ++i) {
    double e = estimate();
    rep.estimates.push_back(e);
    bool ok = truth == 0.0 ? e == 0.0
                           : std::abs(e - truth) <= epsilon * truth;
    if (ok) rep.within += 1;
  }
  rep.fraction = runs == 0 ? 0.0 : double(rep.within) / double(runs);
  return rep;
}

}  // namespace joinsketch
