// k-chain engine: approximate counting and near-uniform sampling for
// pi_{A_1,A_{k+1}}(R_1(A_1,A_2) join ... join R_k(A_k,A_{k+1})).
//
// Counting estimates deg(u) = |{v : u reaches v}| for every start value with
// bottom-K min-hash summaries pushed backward through the chain: merging
// summaries is the sketch of unioning reachable sets, so one pass costs
// O(N K) and m independent repetitions with per-u medians give every deg(u)
// an eps-approximation simultaneously w.p. 1-delta. OUT is the sum of the
// medians.
//
// Sampling draws a start u proportional to the proxy deg~(u) = deg^(u)/(1-eps)
// (an upper bound on deg(u) when the estimates hold), computes the exact
// reachable set, and accepts a uniform member with probability
// deg(u)/deg~(u), which makes every result land with the same per-trial
// probability. Proxies are stored as fixed-point integers so the weighted
// draw and the acceptance test use the same exact rational. A draw whose
// exact degree exceeds its proxy is evidence the estimate failed low; after
// ceil(log2 N) consecutive such draws the table is rebuilt with halved eps.
#pragma once

#include <optional>

#include "joinsketch/index.hpp"
#include "joinsketch/stats.hpp"
#include "joinsketch/tuning.hpp"

namespace joinsketch {

// Pairwise-independent multiply-shift hash of interned ids into [0, 1).
// The top 53 bits of (mult * id + add) mod 2^64 become the mantissa, so the
// value is exact and never rounds up to 1.
struct HashDraw {
  u64 mult = 1;
  u64 add = 0;

  static HashDraw make(Rng& rng) { return {rng.next() | 1, rng.next()}; }

  double operator()(Value v) const {
    u64 y = mult * v.id + add;
    return double(y >> 11) * 0x1.0p-53;
  }
};

// Bottom-K summary: the K smallest distinct hash values seen, ascending.
// Fewer than K stored values means the represented set was seen whole.
struct KMVSummary {
  u32 capacity = 0;
  std::vector<double> values;
};

inline KMVSummary kmv_singleton(const HashDraw& h, Value v, u32 k) {
  if (k == 0) raise(ErrorKind::out_of_range, "summary capacity must be positive");
  return {k, {h(v)}};
}

inline KMVSummary kmv_merge(const KMVSummary& x, const KMVSummary& y) {
  if (x.capacity != y.capacity)
    raise(ErrorKind::invalid_query, "summary capacity mismatch");
  KMVSummary out{x.capacity, {}};
  out.values.reserve(std::min<size_t>(x.values.size() + y.values.size(),
                                      x.capacity));
  size_t i = 0, j = 0;
  while (out.values.size() < out.capacity) {
    bool from_x;
    if (i == x.values.size() && j == y.values.size()) break;
    if (i == x.values.size())
      from_x = false;
    else if (j == y.values.size())
      from_x = true;
    else
      from_x = x.values[i] <= y.values[j];
    double v = from_x ? x.values[i++] : y.values[j++];
    if (out.values.empty() || out.values.back() != v) out.values.push_back(v);
  }
  return out;
}

inline double kmv_estimate(const KMVSummary& s) {
  if (s.values.size() < s.capacity) return double(s.values.size());
  double mx = s.values.back();
  if (!(mx > 0.0)) return double(s.values.size());  // K zero hashes: see whole
  return double(s.capacity) / mx;
}

// Fixed-point scale for degree proxies. Weights are ceil(proxy * scale), so
// the effective proxy weight/scale is >= the real one and exactly the value
// the acceptance test divides by.
inline constexpr u64 kProxyScale = u64(1) << 20;

struct DegreeTable {
  double eps = 0.0;
  double delta = 0.0;
  std::vector<Value> starts;  // start values with a positive estimate
  std::vector<u64> weights;   // ceil(est/(1-eps) * kProxyScale) per start
  std::unordered_map<Value, double, ValueHash> est;  // every start, zeros too
  std::optional<WeightedSampler> sampler;
  u32 rebuilds = 0;

  double proxy(size_t i) const {
    return double(weights[i]) / double(kProxyScale);
  }
  // W = sum of proxies; the per-trial result probability is 1/W.
  double total() const {
    return sampler ? double(sampler->total()) / double(kProxyScale) : 0.0;
  }
  bool empty() const { return !sampler; }
};

struct ChainEstimate {
  double out = 0.0;
  DegreeTable table;
};

// Start value plus its exact set of reachable end values.
struct ReachSet {
  Value start{};
  std::vector<Value> values;
  u64 deg() const { return values.size(); }
};

class ChainEngine {
 public:
  ChainEngine(const Instance& inst, const QuerySpec& spec) {
    u32 k = 0;
    std::vector<size_t> order;
    std::vector<std::string> attrs;
    classify_query(spec);  // rejects malformed queries up front
    if (!detail::is_chain(spec, &k, &order, &attrs))
      raise(ErrorKind::invalid_query, "chain engine needs a chain query");
    k_ = k;
    attrs_ = std::move(attrs);
    rels_.reserve(k_);
    for (u32 i = 0; i < k_; ++i) {
      rels_.emplace_back(inst.relations[order[i]]);
      src_slot_.push_back(rels_[i].slot(attrs_[i]));
      dst_slot_.push_back(rels_[i].slot(attrs_[i + 1]));
      total_rows_ += rels_[i].size();
    }
    auto up = slot_of(spec.output, attrs_.front());
    auto vp = slot_of(spec.output, attrs_.back());
    if (!up || !vp) raise(ErrorKind::invalid_query, "endpoints not in output");
    u_pos_ = *up;
    v_pos_ = *vp;
  }

  u32 k() const { return k_; }
  u64 total_rows() const { return total_rows_; }
  const IndexedRelation& rel(size_t i) const { return rels_[i]; }
  OpCounters& counters() { return ops_; }
  const OpCounters& counters() const { return ops_; }

  std::vector<Value> start_domain() const {
    return rels_[0].active_domain(src_slot_[0]);
  }

  // Exact forward reachability, one layer at a time; each tuple of a layer
  // is visited at most once because the frontier holds distinct values.
  ReachSet reachable_set(Value u) {
    if (rels_[0].degree(src_slot_[0], u) == 0)
      raise(ErrorKind::out_of_range, "unknown start value");
    ReachSet out;
    out.start = u;
    std::vector<Value> frontier{u};
    std::unordered_set<Value, ValueHash> seen;
    for (u32 i = 0; i < k_ && !frontier.empty(); ++i) {
      std::vector<Value> next;
      seen.clear();
      for (Value w : frontier) {
        for (u32 rid : rels_[i].neighbors(src_slot_[i], w)) {
          ops_.neighbor += 1;
          Value d = rels_[i].row(rid)[dst_slot_[i]];
          if (seen.insert(d).second) next.push_back(d);
        }
      }
      frontier = std::move(next);
    }
    out.values = std::move(frontier);
    return out;
  }

  Tuple make_result(Value u, Value v) const {
    Tuple t(2, Value{});
    t[u_pos_] = u;
    t[v_pos_] = v;
    return t;
  }

  // One backward sketch pass under the given hash; the result maps every
  // start value that reaches the end of the chain to its summary.
  std::unordered_map<Value, KMVSummary, ValueHash> sketch_pass(
      const HashDraw& h, u32 cap) {
    std::unordered_map<Value, KMVSummary, ValueHash> summaries;
    for (Value v : rels_[k_ - 1].active_domain(dst_slot_[k_ - 1]))
      summaries.emplace(v, kmv_singleton(h, v, cap));
    for (u32 layer = k_; layer-- > 0;) {
      std::unordered_map<Value, KMVSummary, ValueHash> next;
      for (u32 rid = 0; rid < rels_[layer].size(); ++rid) {
        ops_.sketch_merge += 1;
        const Tuple& t = rels_[layer].row(rid);
        auto it = summaries.find(t[dst_slot_[layer]]);
        if (it == summaries.end()) continue;  // dead end downstream
        KMVSummary& acc = next.try_emplace(t[src_slot_[layer]],
                                           KMVSummary{cap, {}})
                              .first->second;
        ops_.sketch_elems += acc.values.size() + it->second.values.size();
        acc = kmv_merge(acc, it->second);
      }
      summaries = std::move(next);
    }
    return summaries;
  }

 private:
  u32 k_ = 0;
  std::vector<IndexedRelation> rels_;
  std::vector<std::string> attrs_;  // path attributes A_1 .. A_{k+1}
  std::vector<size_t> src_slot_, dst_slot_;
  size_t u_pos_ = 0, v_pos_ = 1;
  u64 total_rows_ = 0;
  OpCounters ops_;
};

// K = ceil(8/eps^2) summary slots, m = ceil(12 ln(N/delta)) repetitions,
// per-start lower medians, OUT estimate = sum of medians. The same medians
// seed the degree table used by the sampler.
inline ChainEstimate approx_count_chain(ChainEngine& eng, double eps,
                                        double delta, Rng& rng) {
  check_estimator_params({eps, delta});
  u32 cap = u32(std::ceil(8.0 / (eps * eps)));
  double n = double(std::max<u64>(eng.total_rows(), 2));
  u64 m = u64(std::ceil(12.0 * std::log(n / delta)));

  std::vector<Value> starts = eng.start_domain();
  std::unordered_map<Value, std::vector<double>, ValueHash> reps;
  for (Value u : starts) reps[u].reserve(m);
  for (u64 j = 0; j < m; ++j) {
    HashDraw h = HashDraw::make(rng);
    auto summaries = eng.sketch_pass(h, cap);
    for (Value u : starts) {
      auto it = summaries.find(u);
      reps[u].push_back(it == summaries.end() ? 0.0
                                              : kmv_estimate(it->second));
    }
  }

  ChainEstimate out;
  out.table.eps = eps;
  out.table.delta = delta;
  for (Value u : starts) {
    double med = lower_median(reps[u]);
    out.out += med;
    out.table.est.emplace(u, med);
    if (med > 0.0) {
      out.table.starts.push_back(u);
      out.table.weights.push_back(
          u64(std::ceil(med / (1.0 - eps) * double(kProxyScale))));
    }
  }
  if (!out.table.weights.empty()) out.table.sampler.emplace(out.table.weights);
  return out;
}

inline ChainEstimate approx_count_chain(const Instance& inst,
                                        const QuerySpec& spec, double eps,
                                        double delta, Rng& rng) {
  ChainEngine eng(inst, spec);
  return approx_count_chain(eng, eps, delta, rng);
}

// Draws until a result is accepted. Conditioned on every table estimate
// being eps-accurate, each result returns with probability exactly
// scale/total-weight per trial. A draw whose exact degree exceeds its proxy
// breaks that guarantee; ceil(log2 N) such draws in a row trigger a rebuild
// of the table at eps/2.
inline Tuple sample_chain(ChainEngine& eng, DegreeTable& table, Rng& rng) {
  if (table.empty())
    raise(ErrorKind::empty_relation, "degenerate degree table");
  u64 n = std::max<u64>(eng.total_rows(), 2);
  u32 strike_limit = 1;
  while ((u64(1) << strike_limit) < n) ++strike_limit;
  u32 strikes = 0;
  for (;;) {
    eng.counters().trials += 1;
    eng.counters().weighted_draw += 1;
    size_t idx = table.sampler->draw(rng);
    ReachSet reach = eng.reachable_set(table.starts[idx]);
    if (double(reach.deg()) > table.proxy(idx)) {
      if (++strikes >= strike_limit) {
        u32 seen = table.rebuilds + 1;
        ChainEstimate fresh =
            approx_count_chain(eng, table.eps / 2.0, table.delta, rng);
        table = std::move(fresh.table);
        table.rebuilds = seen;
        if (table.empty())
          raise(ErrorKind::empty_relation, "degenerate degree table");
        strikes = 0;
      }
      continue;
    }
    strikes = 0;
    if (reach.deg() == 0) continue;
    eng.counters().rand += 2;
    Value v = reach.values[rng.below(reach.deg())];
    if (rng.chance(double(reach.deg()) / table.proxy(idx))) {
      eng.counters().accepted += 1;
      return eng.make_result(reach.start, v);
    }
  }
}

}  // namespace joinsketch
