// k-star engine: uniform sampling from pi_{A_1..A_k} of
// R_1(A_1,B) join R_2(A_2,B) join ... join R_k(A_k,B).
//
// Trials follow the matrix engine's two-step shape. A full-join tuple
// (a_1..a_k, b) is drawn exactly proportional to the per-center weight
// W_b = prod_i |R_i ⋉ b|, then survives with probability exactly
// 1/deg(a_1..a_k) via the negative-hypergeometric scan. The scan walks a
// uniform permutation of the center list of the least-degree leaf (ties to
// the lowest relation index); a candidate b' is a witness iff every other
// relation holds (a_i, b'). A two-relation star is the matrix query; this
// engine accepts it and draws from the same distribution.
#pragma once

#include <optional>

#include "joinsketch/matrix.hpp"

namespace joinsketch {

// Full-join tuple: leaf values in relation order plus the center witness.
struct StarCandidate {
  std::vector<Value> a;
  Value b;
};

struct StarTrialOutcome {
  std::optional<Tuple> result;
  std::optional<StarCandidate> join;
  u64 ops_used = 0;
};

class StarEngine {
 public:
  StarEngine(const Instance& inst, const QuerySpec& spec) {
    QueryShape shape = classify_query(spec);
    if (shape.kind != ShapeKind::star && shape.kind != ShapeKind::matrix)
      raise(ErrorKind::invalid_query, "star engine needs a star query");
    k_ = u32(spec.relations.size());
    // The center attribute appears in every schema and never in the output.
    for (const auto& cand : spec.relations[0]) {
      bool everywhere = true;
      for (const auto& e : spec.relations)
        if (!slot_of(e, cand)) everywhere = false;
      bool projected_away = std::find(spec.output.begin(), spec.output.end(),
                                      cand) == spec.output.end();
      if (everywhere && projected_away) center_ = cand;
    }
    if (center_.empty())
      raise(ErrorKind::invalid_query, "no shared center attribute");
    rels_.reserve(k_);
    for (u32 i = 0; i < k_; ++i) {
      rels_.emplace_back(inst.relations[i]);
      const Schema& e = spec.relations[i];
      const std::string& leaf = (e[0] == center_) ? e[1] : e[0];
      a_slot_.push_back(rels_[i].slot(leaf));
      b_slot_.push_back(rels_[i].slot(center_));
      auto pos = slot_of(spec.output, leaf);
      if (!pos) raise(ErrorKind::invalid_query, "leaf missing from output");
      out_pos_.push_back(*pos);
      total_rows_ += rels_[i].size();
    }
  }

  u32 k() const { return k_; }
  const IndexedRelation& rel(size_t i) const { return rels_[i]; }
  size_t leaf_slot(size_t i) const { return a_slot_[i]; }
  size_t center_slot(size_t i) const { return b_slot_[i]; }
  u64 total_rows() const { return total_rows_; }
  OpCounters& counters() { return ops_; }
  const OpCounters& counters() const { return ops_; }

  u64 leaf_degree(size_t i, Value a) const {
    return rels_[i].degree(a_slot_[i], a);
  }

  // W_b via k degree probes; u128 so N^k-scale products never wrap.
  u128 center_weight(Value b) {
    u128 w = 1;
    for (u32 i = 0; i < k_; ++i) {
      ops_.degree += 1;
      w *= rels_[i].degree(b_slot_[i], b);
      if (w == 0) return 0;
    }
    return w;
  }

  // Builds the weight table over adom(B). The total equals the full-join
  // size exactly.
  void build_star_index() {
    if (indexed_) return;
    indexed_ = true;
    std::vector<u64> weights;
    u128 total = 0;
    for (Value b : rels_[0].active_domain(b_slot_[0])) {
      u128 w = 1;
      for (u32 i = 0; i < k_; ++i) {
        w *= rels_[i].degree(b_slot_[i], b);
        if (w == 0) break;
      }
      if (w == 0) continue;
      if (w > u128(~u64(0)))
        raise(ErrorKind::overflow, "per-value weight overflow");
      total += w;
      b_values_.push_back(b);
      weights.push_back(u64(w));
    }
    if (total > u128(~u64(0))) raise(ErrorKind::overflow, "join size overflow");
    join_size_ = u64(total);
    if (join_size_ > 0) b_sampler_ = WeightedSampler(std::move(weights));
  }

  u64 join_size() {
    build_star_index();
    return join_size_;
  }

  // Weighted full-join draw: every tuple with probability 1/OUT_join.
  StarCandidate sample_star_weighted(Rng& rng) {
    build_star_index();
    if (join_size_ == 0)
      raise(ErrorKind::empty_relation, "weighted draw from an empty join");
    ops_.weighted_draw += 1;
    return extend_join(b_values_[b_sampler_.draw(rng)], rng);
  }

  // Index of the least-degree leaf, ties to the lowest relation index.
  size_t anchor_of(const StarCandidate& s) {
    size_t j = 0;
    u64 best = ~u64(0);
    for (u32 i = 0; i < k_; ++i) {
      ops_.degree += 1;
      u64 d = rels_[i].degree(a_slot_[i], s.a[i]);
      if (d < best) {
        best = d;
        j = i;
      }
    }
    return j;
  }

  // Acceptance step: keeps the candidate with probability exactly
  // 1/deg(a_1..a_k), deg counted within the partition when one is given.
  // failures_out reports F, the non-witnesses scanned before the stop.
  bool accept(const StarCandidate& s, Rng& rng, const BPartition* part = nullptr,
              u64* failures_out = nullptr) {
    for (u32 i = 0; i < k_; ++i) {
      ops_.test_tuple += 1;
      if (!rels_[i].test_row(make_row(i, s.a[i], s.b)))
        raise(ErrorKind::invalid_query, "acceptance on a non-join tuple");
    }
    size_t j = anchor_of(s);
    const auto& list = rels_[j].neighbors(a_slot_[j], s.a[j]);

    u64 failures = 0;
    NoReplacementSampler nr(list.size());
    while (!nr.exhausted()) {
      ops_.neighbor += 1;
      Value cand = rels_[j].row(list[nr.draw(rng) - 1])[b_slot_[j]];
      if (cand == s.b) continue;
      if (part && !part->pass(cand)) continue;
      bool witness = true;
      for (u32 i = 0; i < k_ && witness; ++i) {
        if (i == j) continue;
        ops_.test_tuple += 1;
        witness = rels_[i].test_row(make_row(i, s.a[i], cand));
      }
      if (witness) break;
      ++failures;
    }
    u64 candidates = list.size();
    if (part) {
      candidates = 0;
      for (u32 rid : list) {
        ops_.neighbor += 1;
        if (part->pass(rels_[j].row(rid)[b_slot_[j]])) ++candidates;
      }
    }
    if (failures_out) *failures_out = failures;
    ops_.rand += 1;
    return rng.range(1, candidates) <= failures + 1;
  }

  // One sampling trial: full-join draw then acceptance.
  StarTrialOutcome trial(Rng& rng) {
    u64 before = ops_.total();
    ops_.trials += 1;
    StarTrialOutcome out;
    build_star_index();
    if (join_size_ > 0) {
      StarCandidate s = sample_star_weighted(rng);
      out.join = s;
      if (accept(s, rng)) {
        ops_.accepted += 1;
        out.result = make_result(s.a);
      }
    }
    out.ops_used = ops_.total() - before;
    return out;
  }

  // Repeats trials under the budget; nullopt is the empty verdict.
  std::optional<Tuple> sample(const SampleBudget& budget, Rng& rng) {
    if (join_size() == 0) return std::nullopt;
    for (u32 round = 0; round < budget.rounds; ++round) {
      u64 start = ops_.total();
      while (ops_.total() - start < budget.ops_per_round) {
        StarTrialOutcome t = trial(rng);
        if (t.result) return t.result;
      }
    }
    return std::nullopt;
  }

  // Output tuple in the query's projection order.
  Tuple make_result(const std::vector<Value>& a) const {
    Tuple t(k_, Value{});
    for (u32 i = 0; i < k_; ++i) t[out_pos_[i]] = a[i];
    return t;
  }

  // --- hooks for the hybrid counter ----------------------------------------

  // Weighted draw from a caller-built sampler over a subset of b values.
  StarCandidate sample_star_from(const WeightedSampler& ws,
                                 const std::vector<Value>& values, Rng& rng) {
    ops_.weighted_draw += 1;
    return extend_join(values[ws.draw(rng)], rng);
  }

  // Light-side counter trial: draws through the whole instance (N rows) so a
  // surviving tuple lands with probability exactly 1/(N * cap). The walk
  // starts at a row of R_1 and extends by uniform neighbor picks; the
  // smoothing ratio is E_b / cap with E_b = prod_{i>=2} |R_i ⋉ b|, which is
  // a probability because a light b reached from R_1 has d_1 >= 1 and hence
  // E_b <= W_b <= cap. Heavy b and the rows of R_2..R_k count as rejections.
  std::optional<StarCandidate> counter_light_trial(double cap,
                                                   const BPartition& light,
                                                   Rng& rng) {
    ops_.rand += 1;
    u64 r = rng.range(1, total_rows_);
    if (r > rels_[0].size()) return std::nullopt;
    ops_.sample_tuple += 1;
    const Tuple& t = rels_[0].row(u32(r - 1));
    Value b = t[b_slot_[0]];
    if (!light.pass(b)) return std::nullopt;
    std::vector<u64> deg(k_, 0);
    u128 ext = 1;
    for (u32 i = 1; i < k_; ++i) {
      ops_.degree += 1;
      deg[i] = rels_[i].degree(b_slot_[i], b);
      if (deg[i] == 0) return std::nullopt;
      ext *= deg[i];
    }
    ops_.rand += 1;
    if (!(rng.uniform01() * cap < double(ext))) return std::nullopt;
    StarCandidate s;
    s.a.assign(k_, Value{});
    s.b = b;
    s.a[0] = t[a_slot_[0]];
    for (u32 i = 1; i < k_; ++i) {
      ops_.rand += 1;
      ops_.neighbor += 1;
      u32 rid = rels_[i].neighbor_row(b_slot_[i], b, rng.range(1, deg[i]));
      s.a[i] = rels_[i].row(rid)[a_slot_[i]];
    }
    return s;
  }

  // Whether b' joins the whole leaf vector (k membership probes, early out).
  bool connects(const std::vector<Value>& a, Value b) {
    for (u32 i = 0; i < k_; ++i) {
      ops_.test_tuple += 1;
      if (!rels_[i].test_row(make_row(i, a[i], b))) return false;
    }
    return true;
  }

  // Center value of a uniform row of the whole instance (all k relations).
  Value random_center_value(Rng& rng) {
    ops_.sample_tuple += 1;
    u64 r = rng.below(total_rows_);
    for (u32 i = 0; i < k_; ++i) {
      if (r < rels_[i].size()) return rels_[i].row(u32(r))[b_slot_[i]];
      r -= rels_[i].size();
    }
    raise(ErrorKind::out_of_range, "row index past the instance");
  }

 private:
  StarCandidate extend_join(Value b, Rng& rng) {
    StarCandidate s;
    s.a.assign(k_, Value{});
    s.b = b;
    for (u32 i = 0; i < k_; ++i) {
      ops_.degree += 1;
      u64 d = rels_[i].degree(b_slot_[i], b);
      ops_.rand += 1;
      ops_.neighbor += 1;
      u32 rid = rels_[i].neighbor_row(b_slot_[i], b, rng.range(1, d));
      s.a[i] = rels_[i].row(rid)[a_slot_[i]];
    }
    return s;
  }

  Tuple make_row(size_t i, Value a, Value b) const {
    Tuple t(2, Value{});
    t[a_slot_[i]] = a;
    t[b_slot_[i]] = b;
    return t;
  }

  u32 k_ = 0;
  std::string center_;
  std::vector<IndexedRelation> rels_;
  std::vector<size_t> a_slot_, b_slot_, out_pos_;
  u64 total_rows_ = 0;

  bool indexed_ = false;
  u64 join_size_ = 0;
  std::vector<Value> b_values_;
  WeightedSampler b_sampler_;
  OpCounters ops_;
};

}  // namespace joinsketch
