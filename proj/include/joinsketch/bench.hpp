// Scaling probes over generated instance ladders.
//
// Each probe point builds one generated instance, measures the mean number of
// primitive operations a sampler spends per delivered result, then runs the
// matching approximate counter once on a fresh engine and records its total
// operation count and estimate. The interesting signal is how those costs
// move across a ladder where N stays fixed and OUT grows.
#pragma once

#include <string>
#include <vector>

#include "joinsketch/acyclic.hpp"
#include "joinsketch/chain.hpp"
#include "joinsketch/generate.hpp"
#include "joinsketch/matrix.hpp"
#include "joinsketch/matrix_count.hpp"
#include "joinsketch/star.hpp"
#include "joinsketch/star_count.hpp"
#include "joinsketch/tuning.hpp"

namespace joinsketch {

struct ScalingRow {
  u64 n = 0;
  u64 out = 0;
  u64 delivered = 0;
  double sampler_mean_ops = 0.0;
  u64 counter_ops = 0;
  double estimate = 0.0;
};

inline ScalingRow probe_point(const GeneratedInstance& g, u64 trials,
                              const EstimatorParams& params, Rng& rng,
                              bool with_counter = true) {
  ScalingRow row;
  row.n = g.manifest.n;
  row.out = g.manifest.out.value_or(0);
  ShapeKind kind = classify_query(g.query).kind;
  SampleBudget budget = default_sample_budget(g.inst.total_rows());

  switch (kind) {
    case ShapeKind::matrix: {
      MatrixEngine eng(g.inst, g.query);
      for (u64 t = 0; t < trials; ++t)
        if (eng.sample(MatrixStrategy::weighted, budget, rng))
          ++row.delivered;
      row.sampler_mean_ops = double(eng.counters().total()) /
                             double(std::max<u64>(row.delivered, 1));
      if (with_counter) {
        MatrixEngine cnt(g.inst, g.query);
        row.estimate = approx_count_matrix(cnt, params, rng);
        row.counter_ops = cnt.counters().total();
      }
      break;
    }
    case ShapeKind::star: {
      StarEngine eng(g.inst, g.query);
      for (u64 t = 0; t < trials; ++t)
        if (eng.sample(budget, rng)) ++row.delivered;
      row.sampler_mean_ops = double(eng.counters().total()) /
                             double(std::max<u64>(row.delivered, 1));
      if (with_counter) {
        StarEngine cnt(g.inst, g.query);
        row.estimate = approx_count_star(cnt, params, rng);
        row.counter_ops = cnt.counters().total();
      }
      break;
    }
    case ShapeKind::chain: {
      // Proxy-table construction is preprocessing; only the draws after the
      // counter snapshot contribute to the per-sample mean.
      ChainEngine eng(g.inst, g.query);
      ChainEstimate est =
          approx_count_chain(eng, params.epsilon, params.delta, rng);
      u64 before = eng.counters().total();
      if (!est.table.empty())
        for (u64 t = 0; t < trials; ++t) {
          sample_chain(eng, est.table, rng);
          ++row.delivered;
        }
      row.sampler_mean_ops = double(eng.counters().total() - before) /
                             double(std::max<u64>(row.delivered, 1));
      if (with_counter) {
        ChainEngine cnt(g.inst, g.query);
        ChainEstimate ce =
            approx_count_chain(cnt, params.epsilon, params.delta, rng);
        row.estimate = ce.out;
        row.counter_ops = cnt.counters().total();
      }
      break;
    }
    case ShapeKind::acyclic_general: {
      AcyclicEngine eng(g.inst, g.query);
      for (u64 t = 0; t < trials; ++t)
        if (eng.sample(budget, rng)) ++row.delivered;
      row.sampler_mean_ops = double(eng.counters().total()) /
                             double(std::max<u64>(row.delivered, 1));
      if (with_counter) {
        AcyclicEngine cnt(g.inst, g.query);
        row.estimate =
            approx_count_acyclic(cnt, params.epsilon, params.delta, rng);
        row.counter_ops = cnt.counters().total();
      }
      break;
    }
    default:
      raise(ErrorKind::unsupported, "probe over unsupported query shape");
  }
  return row;
}

// Built-in ladders: N pinned per family, OUT swept upward. Points are sized
// so the full probe (counter included) finishes in seconds per rung on one
// core; the counters get sharply more expensive as OUT shrinks relative to N.
inline std::vector<GeneratorSpec> bench_ladder(const std::string& family,
                                               u64 seed) {
  std::vector<GeneratorSpec> points;
  if (family == "matrix-cartesian") {
    for (i64 out : {64, 256, 1024})
      points.push_back({family, {{"out", out}, {"n", 512}}, seed});
  } else if (family == "star-disjointness") {
    for (i64 l : {4, 8, 16})
      points.push_back(
          {family,
           {{"k", 3}, {"l", l}, {"m", 192 / l}, {"planted", 1}},
           seed});
  } else if (family == "chain-d0d1") {
    for (i64 delta : {16, 64, 256})
      points.push_back(
          {family,
           {{"theta", 2}, {"l", 1}, {"delta", delta}, {"n", 256}},
           seed});
  } else if (family == "zipf-random") {
    for (i64 rows : {128, 256, 512})
      points.push_back(
          {family, {{"rows", rows}, {"dom", rows / 2}, {"skew", 100}}, seed});
  } else {
    raise(ErrorKind::invalid_query, "no bench ladder for family: " + family);
  }
  return points;
}

inline std::vector<ScalingRow> scaling_probe(const std::string& family,
                                             u64 trials,
                                             const EstimatorParams& params,
                                             u64 seed) {
  std::vector<ScalingRow> table;
  Rng rng(mix64(seed ^ 0x5ca11ab1e5ULL));
  for (const GeneratorSpec& gs : bench_ladder(family, seed)) {
    auto made = generate(gs);
    table.push_back(probe_point(made[0], trials, params, rng));
  }
  return table;
}

}  // namespace joinsketch
