// Generic engine for acyclic join-project queries.
//
// A GYO ear-removal pass produces a join tree (cartesian components hang off
// an empty separator, so the result is always a single tree). Bottom-up
// per-tuple extension counts make the root aggregate the exact full-join
// size, and top-down draws proportional to those counts give every full-join
// tuple probability exactly 1/OUT_join. A drawn tuple s is then thinned to
// the projection: the residual instance pins s on the output attributes,
// the same tree machinery counts its full join deg(pi_y s) exactly, and s
// survives with probability 1/deg. Each projected result therefore lands
// with per-trial probability 1/OUT_join, i.e. uniform over the output.
//
// The counter runs the guess ladder on top of the same trial: with
// W = OUT_join known exactly, each trial succeeds with probability OUT/W,
// so ceil(6W/(eps^2 lambda)) trials per repetition estimate OUT once the
// guess lambda falls to it.
#pragma once

#include <functional>
#include <optional>

#include "joinsketch/index.hpp"
#include "joinsketch/stats.hpp"
#include "joinsketch/tuning.hpp"

namespace joinsketch {

struct JoinTree {
  struct Node {
    i64 parent = -1;
    std::vector<size_t> children;
    Schema link;  // attrs shared with the parent, in this schema's order
  };
  bool acyclic = false;
  size_t root = 0;
  std::vector<Node> nodes;  // aligned with the relation list
};

namespace detail {

// Orients the GYO fold forest into a tree rooted at the node holding the
// lexicographically smallest anchor attribute (ties to the lowest index).
inline JoinTree build_join_tree_over(const std::vector<Schema>& schemas,
                                     const std::vector<std::string>& anchors) {
  JoinTree t;
  auto fold = gyo_reduce(schemas);
  if (!fold) return t;
  t.acyclic = true;
  size_t n = schemas.size();
  t.nodes.resize(n);

  std::vector<std::vector<size_t>> adj(n);
  for (size_t i = 0; i < n; ++i) {
    if ((*fold)[i] == i) continue;
    adj[i].push_back((*fold)[i]);
    adj[(*fold)[i]].push_back(i);
  }

  std::string anchor;
  for (const auto& a : anchors)
    if (anchor.empty() || a < anchor) anchor = a;
  t.root = 0;
  for (size_t i = 0; i < n; ++i) {
    if (anchor.empty() ? (*fold)[i] == i
                       : slot_of(schemas[i], anchor).has_value()) {
      t.root = i;
      break;
    }
  }

  std::vector<i64> parent(n, -2);
  std::vector<size_t> order{t.root};
  parent[t.root] = -1;
  for (size_t h = 0; h < order.size(); ++h)
    for (size_t w : adj[order[h]])
      if (parent[w] == -2) {
        parent[w] = i64(order[h]);
        order.push_back(w);
      }

  for (size_t i = 0; i < n; ++i) {
    t.nodes[i].parent = parent[i];
    if (parent[i] < 0) continue;
    t.nodes[size_t(parent[i])].children.push_back(i);
    for (const auto& a : schemas[i])
      if (slot_of(schemas[size_t(parent[i])], a))
        t.nodes[i].link.push_back(a);
  }
  return t;
}

struct NodeCounts {
  std::vector<size_t> link_slots;  // parent-link slots in this schema
  std::vector<u64> cnt;            // full-join extensions below, per row
  std::unordered_map<Tuple, u64, TupleHash> key_sum;
  std::unordered_map<Tuple, std::vector<u32>, TupleHash> key_rows;
  std::unordered_map<Tuple, WeightedSampler, TupleHash> key_pick;
};

struct TreeCounts {
  std::vector<NodeCounts> nodes;
  std::vector<size_t> bfs;  // root first
  u64 total = 0;            // exact full-join size
};

inline u64 narrow_count(u128 v) {
  if (v > u128(~u64(0)))
    raise(ErrorKind::overflow, "join count exceeds 64 bits");
  return u64(v);
}

// Bottom-up extension counting over an already-built tree. Row access is
// abstracted so the engine (indexed relations) and the residual counter
// (scratch tuple vectors) share the one implementation.
inline TreeCounts annotate_tree(
    const JoinTree& tree, const std::vector<Schema>& schemas,
    const std::function<u64(size_t)>& nrows,
    const std::function<const Tuple&(size_t, u32)>& row_at,
    bool build_samplers, OpCounters& ops) {
  size_t n = schemas.size();
  TreeCounts tc;
  tc.nodes.resize(n);
  tc.bfs.reserve(n);
  tc.bfs.push_back(tree.root);
  for (size_t h = 0; h < tc.bfs.size(); ++h)
    for (size_t c : tree.nodes[tc.bfs[h]].children) tc.bfs.push_back(c);

  for (size_t v = 0; v < n; ++v)
    for (const auto& a : tree.nodes[v].link)
      tc.nodes[v].link_slots.push_back(*slot_of(schemas[v], a));

  for (size_t h = n; h-- > 0;) {
    size_t v = tc.bfs[h];
    NodeCounts& nc = tc.nodes[v];
    // Link attrs of each child located in this node's schema.
    std::vector<std::vector<size_t>> child_slots;
    for (size_t c : tree.nodes[v].children) {
      std::vector<size_t> slots;
      for (const auto& a : tree.nodes[c].link)
        slots.push_back(*slot_of(schemas[v], a));
      child_slots.push_back(std::move(slots));
    }

    u64 rows = nrows(v);
    nc.cnt.resize(rows, 0);
    std::unordered_map<Tuple, u128, TupleHash> sums;
    for (u32 r = 0; r < rows; ++r) {
      ops.test_tuple += 1;
      const Tuple& t = row_at(v, r);
      u128 c = 1;
      for (size_t ci = 0; ci < child_slots.size(); ++ci) {
        Tuple key;
        key.reserve(child_slots[ci].size());
        for (size_t s : child_slots[ci]) key.push_back(t[s]);
        const auto& child_sum = tc.nodes[tree.nodes[v].children[ci]].key_sum;
        auto it = child_sum.find(key);
        u64 f = it == child_sum.end() ? 0 : it->second;
        if (f == 0) {
          c = 0;
          break;
        }
        if (c > u128(~u64(0)) / f)
          raise(ErrorKind::overflow, "join count exceeds 64 bits");
        c *= f;
      }
      nc.cnt[r] = narrow_count(c);
      if (nc.cnt[r] == 0) continue;
      Tuple key;
      key.reserve(nc.link_slots.size());
      for (size_t s : nc.link_slots) key.push_back(t[s]);
      sums[key] += c;
      if (build_samplers) nc.key_rows[key].push_back(r);
    }
    for (auto& [key, total] : sums) nc.key_sum[key] = narrow_count(total);
    if (build_samplers)
      for (auto& [key, ids] : nc.key_rows) {
        std::vector<u64> w;
        w.reserve(ids.size());
        for (u32 r : ids) w.push_back(nc.cnt[r]);
        nc.key_pick.emplace(key, WeightedSampler(std::move(w)));
      }
  }

  auto it = tc.nodes[tree.root].key_sum.find(Tuple{});
  tc.total = it == tc.nodes[tree.root].key_sum.end() ? 0 : it->second;
  return tc;
}

}  // namespace detail

inline JoinTree build_join_tree(const QuerySpec& spec) {
  return detail::build_join_tree_over(spec.relations, spec.output);
}

// Residual relations: pi_{e-y}(R_e semijoin pi_y s), deduplicated. A schema
// fully inside y degenerates to arity zero and carries at most the single
// empty tuple.
struct ResidualInstance {
  std::vector<Schema> schemas;
  std::vector<std::vector<Tuple>> rows;
};

class AcyclicEngine {
 public:
  AcyclicEngine(const Instance& inst, const QuerySpec& spec) : spec_(spec) {
    classify_query(spec_);  // raises on malformed specs (incl. empty output)
    tree_ = build_join_tree(spec_);
    if (!tree_.acyclic)
      raise(ErrorKind::invalid_query, "query is not acyclic");
    for (size_t a = 0; a < spec_.attributes.size(); ++a)
      attr_index_.emplace(spec_.attributes[a], a);
    for (size_t i = 0; i < spec_.relations.size(); ++i) {
      rels_.emplace_back(inst.relations[i]);
      total_rows_ += rels_[i].size();
      std::vector<size_t> pos;
      for (const auto& a : spec_.relations[i]) pos.push_back(attr_index_.at(a));
      attr_pos_.push_back(std::move(pos));
    }
    for (const auto& a : spec_.output) out_pos_.push_back(attr_index_.at(a));
    counts_ = detail::annotate_tree(
        tree_, spec_.relations, [&](size_t v) { return rels_[v].size(); },
        [&](size_t v, u32 r) -> const Tuple& { return rels_[v].row(r); },
        /*build_samplers=*/true, ops_);
  }

  const JoinTree& tree() const { return tree_; }
  u64 out_join() const { return counts_.total; }
  u64 total_rows() const { return total_rows_; }
  const IndexedRelation& rel(size_t i) const { return rels_[i]; }
  OpCounters& counters() { return ops_; }
  const OpCounters& counters() const { return ops_; }

  // Uniform full-join tuple over the query's attribute list.
  Tuple join_sample(Rng& rng) {
    if (counts_.total == 0)
      raise(ErrorKind::empty_relation, "sampling an empty join");
    Tuple out(spec_.attributes.size(), Value{});
    for (size_t v : counts_.bfs) {
      const detail::NodeCounts& nc = counts_.nodes[v];
      Tuple key;
      key.reserve(tree_.nodes[v].link.size());
      for (const auto& a : tree_.nodes[v].link)
        key.push_back(out[attr_index_.at(a)]);
      ops_.weighted_draw += 1;
      const auto& ids = nc.key_rows.at(key);
      u32 r = ids[nc.key_pick.at(key).draw(rng)];
      const Tuple& t = rels_[v].row(r);
      for (size_t s = 0; s < t.size(); ++s) out[attr_pos_[v][s]] = t[s];
    }
    return out;
  }

  // s must assign every query attribute; y must be a non-empty subset of
  // the attributes.
  ResidualInstance residual_instance(const Tuple& s,
                                     const std::vector<std::string>& y) {
    if (s.size() != spec_.attributes.size())
      raise(ErrorKind::schema_mismatch, "full-join tuple has wrong arity");
    if (y.empty())
      raise(ErrorKind::invalid_query, "projection must keep an attribute");
    std::unordered_set<std::string> yset(y.begin(), y.end());
    for (const auto& a : y)
      if (!attr_index_.count(a))
        raise(ErrorKind::invalid_query, "projection attribute not declared");

    ResidualInstance res;
    for (size_t i = 0; i < rels_.size(); ++i) {
      const Schema& e = spec_.relations[i];
      std::vector<size_t> filt, proj;
      Schema out_schema;
      for (size_t sl = 0; sl < e.size(); ++sl) {
        if (yset.count(e[sl])) {
          filt.push_back(sl);
        } else {
          proj.push_back(sl);
          out_schema.push_back(e[sl]);
        }
      }
      std::vector<Tuple> out_rows;
      if (proj.empty()) {
        // e inside y: the pinned tuple either exists or it does not.
        Tuple probe;
        probe.reserve(e.size());
        for (size_t sl = 0; sl < e.size(); ++sl)
          probe.push_back(s[attr_pos_[i][sl]]);
        ops_.test_tuple += 1;
        if (rels_[i].test_row(probe)) out_rows.push_back(Tuple{});
      } else {
        std::unordered_set<Tuple, TupleHash> seen;
        auto admit = [&](const Tuple& t) {
          for (size_t f : filt)
            if (!(t[f] == s[attr_pos_[i][f]])) return false;
          Tuple p;
          p.reserve(proj.size());
          for (size_t sl : proj) p.push_back(t[sl]);
          if (seen.insert(p).second) out_rows.push_back(std::move(p));
          return true;
        };
        if (filt.empty()) {
          for (u32 r = 0; r < rels_[i].size(); ++r) {
            ops_.neighbor += 1;
            admit(rels_[i].row(r));
          }
        } else {
          Value pin = s[attr_pos_[i][filt[0]]];
          for (u32 r : rels_[i].neighbors(filt[0], pin)) {
            ops_.neighbor += 1;
            admit(rels_[i].row(r));
          }
        }
      }
      res.schemas.push_back(std::move(out_schema));
      res.rows.push_back(std::move(out_rows));
    }
    return res;
  }

  // Exact |full join| of a residual instance, via the same tree machinery.
  u64 residual_count(const ResidualInstance& res) {
    std::vector<std::string> all;
    for (const auto& sc : res.schemas)
      for (const auto& a : sc) all.push_back(a);
    JoinTree rt = detail::build_join_tree_over(res.schemas, all);
    if (!rt.acyclic)  // cannot happen for acyclic inputs
      raise(ErrorKind::invalid_query, "residual query is not acyclic");
    detail::TreeCounts tc = detail::annotate_tree(
        rt, res.schemas, [&](size_t v) { return u64(res.rows[v].size()); },
        [&](size_t v, u32 r) -> const Tuple& { return res.rows[v][r]; },
        /*build_samplers=*/false, ops_);
    return tc.total;
  }

  // deg(pi_y s) computed exactly, then a 1/deg coin.
  bool accept_exact(const Tuple& s, Rng& rng) {
    u64 deg = residual_count(residual_instance(s, spec_.output));
    if (deg == 0)
      raise(ErrorKind::invalid_instance, "tuple outside the join");
    ops_.rand += 1;
    return rng.range(1, deg) == 1;
  }

  Tuple project(const Tuple& s) const {
    Tuple out;
    out.reserve(out_pos_.size());
    for (size_t p : out_pos_) out.push_back(s[p]);
    return out;
  }

  std::optional<Tuple> trial(Rng& rng) {
    ops_.trials += 1;
    Tuple s = join_sample(rng);
    if (!accept_exact(s, rng)) return std::nullopt;
    ops_.accepted += 1;
    return project(s);
  }

  std::optional<Tuple> sample(const SampleBudget& budget, Rng& rng) {
    if (counts_.total == 0) return std::nullopt;
    for (u32 round = 0; round < budget.rounds; ++round) {
      u64 start = ops_.total();
      while (ops_.total() - start < budget.ops_per_round) {
        auto t = trial(rng);
        if (t) return t;
      }
    }
    return std::nullopt;
  }

  const QuerySpec& spec() const { return spec_; }

 private:
  QuerySpec spec_;
  JoinTree tree_;
  std::vector<IndexedRelation> rels_;
  detail::TreeCounts counts_;
  std::unordered_map<std::string, size_t> attr_index_;
  std::vector<std::vector<size_t>> attr_pos_;  // node slot -> attribute index
  std::vector<size_t> out_pos_;
  u64 total_rows_ = 0;
  OpCounters ops_;
};

// Exact full-join count; the output list is irrelevant to the total, so any
// valid spec for the instance works.
inline u64 yannakakis_count(const Instance& inst, const QuerySpec& spec) {
  AcyclicEngine eng(inst, spec);
  return eng.out_join();
}

inline std::optional<Tuple> sample_join_project(AcyclicEngine& eng,
                                                const SampleBudget& budget,
                                                Rng& rng) {
  return eng.sample(budget, rng);
}

// Guess ladder with W = OUT_join known exactly: ceil(6W/(eps^2 lambda))
// trials per repetition, lower median of ceil(3 ln(2/delta)) repetitions,
// first validated rung wins. OUT >= 1 whenever W >= 1 (a non-empty join
// projects to something), so the ladder always terminates near OUT.
inline double approx_count_acyclic(AcyclicEngine& eng, double eps,
                                   double delta, Rng& rng) {
  check_estimator_params({eps, delta});
  if (eng.out_join() == 0) return 0.0;
  double w = double(eng.out_join());
  u64 k_rep = u64(std::ceil(3.0 * std::log(2.0 / delta)));
  for (double lam = w; lam >= 1.0; lam /= 2.0) {
    u64 k_lambda = u64(std::ceil(6.0 * w / (eps * eps * lam)));
    std::vector<double> reps;
    reps.reserve(k_rep);
    for (u64 rep = 0; rep < k_rep; ++rep) {
      u64 hits = 0;
      for (u64 t = 0; t < k_lambda; ++t) {
        eng.counters().trials += 1;
        if (eng.accept_exact(eng.join_sample(rng), rng)) {
          eng.counters().accepted += 1;
          ++hits;
        }
      }
      reps.push_back(w * double(hits) / double(k_lambda));
    }
    double s = lower_median(reps);
    if (s >= lam || lam < 2.0) return s;
  }
  return 0.0;
}

inline double approx_count_acyclic(const Instance& inst, const QuerySpec& spec,
                                   const EstimatorParams& params, Rng& rng) {
  AcyclicEngine eng(inst, spec);
  return approx_count_acyclic(eng, params.epsilon, params.delta, rng);
}

}  // namespace joinsketch
