// Matrix-shape engine: uniform sampling from pi_{A,C}(R1(A,B) join R2(B,C)).
//
// Trials have two halves. First a full-join triple (a,b,c) is drawn, either
// exactly proportional to the per-b weight |R1 ⋉ b| * |R2 ⋉ b| (weighted
// strategy, O(N) index) or by rejection through R1 with a degree cap
// (capped strategy, no index). Second, the triple survives with probability
// exactly 1 / deg(a,c): scan a uniform permutation of the shorter candidate
// list until a second witness appears, then compare a fresh uniform draw
// against the scan length. That is the negative-hypergeometric acceptance
// trick; its failure count F satisfies E[F+1] = |S| / deg, so conditioning
// RandInt(1,|S|) <= F+1 lands every projected result at the same rate.
#pragma once

#include <optional>
#include <unordered_set>

#include "joinsketch/index.hpp"
#include "joinsketch/tuning.hpp"

namespace joinsketch {

struct JoinTriple {
  Value a, b, c;
};

enum class MatrixStrategy { weighted, capped };

struct TrialOutcome {
  std::optional<Tuple> result;     // projected output tuple on acceptance
  std::optional<JoinTriple> join;  // the full-join triple, when one was drawn
  u64 ops_used = 0;
};

// Restriction of the join attribute's domain to one side of a heavy/light
// partition (used by the counters; a null set means no restriction).
struct BPartition {
  const std::unordered_set<Value, ValueHash>* heavy = nullptr;
  bool keep_heavy = false;
  bool pass(Value b) const {
    if (!heavy) return true;
    return (heavy->count(b) > 0) == keep_heavy;
  }
};

class MatrixEngine {
 public:
  MatrixEngine(const Instance& inst, const QuerySpec& spec) {
    QueryShape shape = classify_query(spec);
    if (shape.kind != ShapeKind::matrix)
      raise(ErrorKind::invalid_query, "matrix engine needs a matrix query");
    lhs_ = IndexedRelation(inst.relations[0]);
    rhs_ = IndexedRelation(inst.relations[1]);
    // Resolve roles: the shared attribute joins the two relations.
    const Schema& e1 = spec.relations[0];
    const Schema& e2 = spec.relations[1];
    join_attr_ = (slot_of(e2, e1[0]) ? e1[0] : e1[1]);
    a_attr_ = (e1[0] == join_attr_) ? e1[1] : e1[0];
    c_attr_ = (e2[0] == join_attr_) ? e2[1] : e2[0];
    a_slot_ = lhs_.slot(a_attr_);
    lb_slot_ = lhs_.slot(join_attr_);
    rb_slot_ = rhs_.slot(join_attr_);
    c_slot_ = rhs_.slot(c_attr_);
    a_first_ = (spec.output[0] == a_attr_);
    for (const Tuple& t : inst.relations[1].rows)
      max_rhs_degree_ = std::max(max_rhs_degree_, rhs_.degree(rb_slot_, t[rb_slot_]));
  }

  const IndexedRelation& lhs() const { return lhs_; }
  const IndexedRelation& rhs() const { return rhs_; }
  u64 total_rows() const { return lhs_.size() + rhs_.size(); }
  u64 max_rhs_degree() const { return max_rhs_degree_; }
  OpCounters& counters() { return ops_; }
  const OpCounters& counters() const { return ops_; }

  // Builds the per-b weight table W_b = |R1 ⋉ b| * |R2 ⋉ b|. The total
  // equals the full-join size exactly.
  void build_join_index() {
    if (indexed_) return;
    indexed_ = true;
    std::vector<u64> weights;
    u128 total = 0;
    for (Value b : lhs_.active_domain(lb_slot_)) {
      u64 d1 = lhs_.degree(lb_slot_, b);
      u64 d2 = rhs_.degree(rb_slot_, b);
      u128 w = u128(d1) * d2;
      if (w == 0) continue;
      if (w > u128(~u64(0))) raise(ErrorKind::overflow, "per-value weight overflow");
      total += w;
      b_values_.push_back(b);
      weights.push_back(u64(w));
    }
    if (total > u128(~u64(0))) raise(ErrorKind::overflow, "join size overflow");
    join_size_ = u64(total);
    if (join_size_ > 0) b_sampler_ = WeightedSampler(std::move(weights));
  }

  u64 join_size() {
    build_join_index();
    return join_size_;
  }

  // Weighted full-join draw: every triple with probability 1/OUT_join.
  JoinTriple sample_join_weighted(Rng& rng) {
    build_join_index();
    if (join_size_ == 0)
      raise(ErrorKind::empty_relation, "weighted draw from an empty join");
    ops_.weighted_draw += 1;
    Value b = b_values_[b_sampler_.draw(rng)];
    return extend_join(b, rng);
  }

  // Capped rejection draw: every triple with probability 1/(|R1| * cap);
  // returns nullopt on rejection. Requires cap >= every |R2 ⋉ b|.
  std::optional<JoinTriple> sample_join_capped(u64 cap, Rng& rng) {
    if (cap == 0) raise(ErrorKind::out_of_range, "degree cap must be positive");
    ops_.sample_tuple += 1;
    const Tuple& t = lhs_.row(lhs_.sample_row(rng));
    Value a = t[a_slot_], b = t[lb_slot_];
    ops_.degree += 1;
    u64 d2 = rhs_.degree(rb_slot_, b);
    if (d2 == 0) return std::nullopt;
    if (d2 > cap)
      raise(ErrorKind::out_of_range, "degree cap below an actual degree");
    ops_.rand += 1;
    if (rng.range(1, cap) > d2) return std::nullopt;  // smoothing to 1/cap
    ops_.rand += 1;
    ops_.neighbor += 1;
    Value c = rhs_.partner(rb_slot_, b, rng.range(1, d2));
    return JoinTriple{a, b, c};
  }

  // Acceptance step: keeps the triple with probability exactly
  // 1 / deg(a,c), deg counted within the partition when one is given.
  // failures_out reports F, the non-witnesses scanned before the stop.
  bool accept(const JoinTriple& s, Rng& rng, const BPartition* part = nullptr,
              u64* failures_out = nullptr) {
    ops_.test_tuple += 2;
    if (!lhs_.test_row(make_lhs_row(s.a, s.b)) ||
        !rhs_.test_row(make_rhs_row(s.b, s.c)))
      raise(ErrorKind::invalid_query, "acceptance on a non-join triple");
    ops_.degree += 2;
    u64 d1 = lhs_.degree(a_slot_, s.a);
    u64 d2 = rhs_.degree(c_slot_, s.c);
    bool use_lhs = d1 < d2;
    size_t side_slot = use_lhs ? a_slot_ : c_slot_;
    size_t partner_slot = use_lhs ? lb_slot_ : rb_slot_;
    const IndexedRelation& side = use_lhs ? lhs_ : rhs_;
    Value anchor = use_lhs ? s.a : s.c;
    const auto& list = side.neighbors(side_slot, anchor);

    u64 failures = 0;
    NoReplacementSampler nr(list.size());
    while (!nr.exhausted()) {
      ops_.neighbor += 1;
      Value cand = side.row(list[nr.draw(rng) - 1])[partner_slot];
      if (cand == s.b) continue;
      if (part && !part->pass(cand)) continue;
      ops_.test_tuple += 2;
      bool witness = lhs_.test_row(make_lhs_row(s.a, cand)) &&
                     rhs_.test_row(make_rhs_row(cand, s.c));
      if (witness) break;
      ++failures;
    }
    u64 candidates = list.size();
    if (part) {
      candidates = 0;
      for (u32 rid : list) {
        ops_.neighbor += 1;
        if (part->pass(side.row(rid)[partner_slot])) ++candidates;
      }
    }
    if (failures_out) *failures_out = failures;
    ops_.rand += 1;
    return rng.range(1, candidates) <= failures + 1;
  }

  // One sampling trial: full-join draw then acceptance.
  TrialOutcome trial(MatrixStrategy strat, Rng& rng, u64 cap = 0) {
    u64 before = ops_.total();
    ops_.trials += 1;
    TrialOutcome out;
    std::optional<JoinTriple> s;
    if (strat == MatrixStrategy::weighted) {
      build_join_index();
      if (join_size_ > 0) s = sample_join_weighted(rng);
    } else {
      s = sample_join_capped(cap == 0 ? std::max<u64>(max_rhs_degree_, 1) : cap,
                             rng);
    }
    if (s) {
      out.join = s;
      if (accept(*s, rng)) {
        ops_.accepted += 1;
        out.result = make_result(s->a, s->c);
      }
    }
    out.ops_used = ops_.total() - before;
    return out;
  }

  // Repeats trials under the budget; nullopt is the empty verdict.
  std::optional<Tuple> sample(MatrixStrategy strat, const SampleBudget& budget,
                              Rng& rng) {
    if (strat == MatrixStrategy::weighted && join_size() == 0)
      return std::nullopt;
    if (lhs_.size() == 0 || rhs_.size() == 0) return std::nullopt;
    for (u32 round = 0; round < budget.rounds; ++round) {
      u64 start = ops_.total();
      while (ops_.total() - start < budget.ops_per_round) {
        TrialOutcome t = trial(strat, rng);
        if (t.result) return t.result;
      }
    }
    return std::nullopt;
  }

  Tuple make_result(Value a, Value c) const {
    return a_first_ ? Tuple{a, c} : Tuple{c, a};
  }

  // --- hooks for the hybrid counter ----------------------------------------

  // Weighted draw from a caller-built sampler over a subset of b values.
  JoinTriple sample_join_from(const WeightedSampler& ws,
                              const std::vector<Value>& values, Rng& rng) {
    ops_.weighted_draw += 1;
    return extend_join(values[ws.draw(rng)], rng);
  }

  // Light-side counter trial: draws through the whole instance (N rows) so a
  // surviving triple lands with probability exactly 1/(N * cap). Heavy b and
  // the rows of R2 count as rejections.
  std::optional<JoinTriple> counter_light_trial(double cap,
                                                const BPartition& light,
                                                Rng& rng) {
    ops_.rand += 1;
    u64 r = rng.range(1, total_rows());
    if (r > lhs_.size()) return std::nullopt;
    ops_.sample_tuple += 1;
    const Tuple& t = lhs_.row(u32(r - 1));
    Value a = t[a_slot_], b = t[lb_slot_];
    if (!light.pass(b)) return std::nullopt;
    ops_.degree += 1;
    u64 d2 = rhs_.degree(rb_slot_, b);
    if (d2 == 0) return std::nullopt;
    ops_.rand += 1;
    if (!(rng.uniform01() * cap < double(d2))) return std::nullopt;
    ops_.rand += 1;
    ops_.neighbor += 1;
    Value c = rhs_.partner(rb_slot_, b, rng.range(1, d2));
    return JoinTriple{a, b, c};
  }

  bool is_join_triple(const JoinTriple& s) {
    ops_.test_tuple += 2;
    return lhs_.test_row(make_lhs_row(s.a, s.b)) &&
           rhs_.test_row(make_rhs_row(s.b, s.c));
  }

  size_t lhs_join_slot() const { return lb_slot_; }
  size_t rhs_join_slot() const { return rb_slot_; }

 private:
  JoinTriple extend_join(Value b, Rng& rng) {
    ops_.degree += 2;
    u64 d1 = lhs_.degree(lb_slot_, b);
    u64 d2 = rhs_.degree(rb_slot_, b);
    ops_.rand += 2;
    ops_.neighbor += 2;
    Value a = lhs_.row(lhs_.neighbor_row(lb_slot_, b, rng.range(1, d1)))[a_slot_];
    Value c = rhs_.row(rhs_.neighbor_row(rb_slot_, b, rng.range(1, d2)))[c_slot_];
    return JoinTriple{a, b, c};
  }

  Tuple make_lhs_row(Value a, Value b) const {
    Tuple t(2, Value{});
    t[a_slot_] = a;
    t[lb_slot_] = b;
    return t;
  }
  Tuple make_rhs_row(Value b, Value c) const {
    Tuple t(2, Value{});
    t[rb_slot_] = b;
    t[c_slot_] = c;
    return t;
  }

  IndexedRelation lhs_, rhs_;
  std::string a_attr_, c_attr_, join_attr_;
  size_t a_slot_ = 0, lb_slot_ = 1, rb_slot_ = 0, c_slot_ = 1;
  bool a_first_ = true;
  u64 max_rhs_degree_ = 0;

  bool indexed_ = false;
  u64 join_size_ = 0;
  std::vector<Value> b_values_;
  WeightedSampler b_sampler_;
  OpCounters ops_;
};

}  // namespace joinsketch
