// Data model: values, tuples, relations, instances, query specs, and the
// query-shape classifier.
//
// A Value is an interned 64-bit id; ValueDict maps ids back to the external
// strings when an instance came from files or a generator. A Tuple stores its
// values in schema order, so a tuple only means something next to a Schema.
// Projected results follow the order of QuerySpec::output.
#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "joinsketch/common.hpp"

namespace joinsketch {

struct Value {
  u64 id = 0;
  friend bool operator==(Value a, Value b) { return a.id == b.id; }
  friend bool operator!=(Value a, Value b) { return a.id != b.id; }
  friend bool operator<(Value a, Value b) { return a.id < b.id; }
};

struct ValueHash {
  size_t operator()(Value v) const { return size_t(mix64(v.id)); }
};

using Schema = std::vector<std::string>;
using Tuple = std::vector<Value>;

struct TupleHash {
  size_t operator()(const Tuple& t) const {
    u64 h = 0x8f3a9b1dc4e57u;
    for (Value v : t) h = mix64(h ^ mix64(v.id));
    return size_t(h);
  }
};

// Interning table. Ids are dense in first-seen order, which makes the
// emit/ingest round trip reproduce ids exactly.
class ValueDict {
 public:
  Value intern(const std::string& s) {
    auto it = ids_.find(s);
    if (it != ids_.end()) return Value{it->second};
    u64 id = names_.size();
    ids_.emplace(s, id);
    names_.push_back(s);
    return Value{id};
  }
  std::optional<Value> lookup(const std::string& s) const {
    auto it = ids_.find(s);
    if (it == ids_.end()) return std::nullopt;
    return Value{it->second};
  }
  std::string name(Value v) const {
    if (v.id < names_.size()) return names_[v.id];
    return "v" + std::to_string(v.id);
  }
  size_t size() const { return names_.size(); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, u64> ids_;
};

struct Relation {
  Schema schema;
  std::vector<Tuple> rows;
};

struct Instance {
  std::vector<Relation> relations;
  ValueDict dict;

  u64 total_rows() const {
    u64 n = 0;
    for (const auto& r : relations) n += r.rows.size();
    return n;
  }
};

// Query spec: attributes V, relation schemas E, output attributes y.
struct QuerySpec {
  std::vector<std::string> attributes;
  std::vector<Schema> relations;
  std::vector<std::string> output;
};

enum class ShapeKind { matrix, star, chain, acyclic_general, unsupported };

struct QueryShape {
  ShapeKind kind = ShapeKind::unsupported;
  u32 k = 0;  // relation count for star/chain
  friend bool operator==(const QueryShape& a, const QueryShape& b) {
    return a.kind == b.kind && a.k == b.k;
  }
};

struct EstimatorParams {
  double epsilon = 0.2;
  double delta = 0.1;
};

inline void check_estimator_params(const EstimatorParams& p) {
  if (!(p.epsilon > 0.0) || !(p.epsilon < 1.0))
    raise(ErrorKind::out_of_range, "epsilon must lie in (0,1)");
  if (!(p.delta > 0.0) || !(p.delta < 1.0))
    raise(ErrorKind::out_of_range, "delta must lie in (0,1)");
}

// --- schema helpers ---------------------------------------------------------

inline std::optional<size_t> slot_of(const Schema& s, const std::string& a) {
  for (size_t i = 0; i < s.size(); ++i)
    if (s[i] == a) return i;
  return std::nullopt;
}

// Slot positions of `attrs` inside `s`; raises if any attribute is missing.
inline std::vector<size_t> slots_of(const Schema& s,
                                    const std::vector<std::string>& attrs) {
  std::vector<size_t> out;
  out.reserve(attrs.size());
  for (const auto& a : attrs) {
    auto p = slot_of(s, a);
    if (!p) raise(ErrorKind::schema_mismatch, "attribute not in schema: " + a);
    out.push_back(*p);
  }
  return out;
}

inline Tuple project(const Tuple& t, const std::vector<size_t>& slots) {
  Tuple out;
  out.reserve(slots.size());
  for (size_t s : slots) out.push_back(t[s]);
  return out;
}

inline bool same_attr_set(const Schema& a, const Schema& b) {
  if (a.size() != b.size()) return false;
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  return sa == sb;
}

// --- query validation -------------------------------------------------------

inline std::vector<std::string> validate_query(const QuerySpec& q) {
  std::vector<std::string> bad;
  std::set<std::string> attrs(q.attributes.begin(), q.attributes.end());
  if (attrs.size() != q.attributes.size())
    bad.push_back("duplicate attribute names");
  if (q.relations.empty()) bad.push_back("no relation schemas");
  std::set<std::string> covered;
  for (size_t i = 0; i < q.relations.size(); ++i) {
    const Schema& e = q.relations[i];
    std::set<std::string> se(e.begin(), e.end());
    if (se.size() != e.size())
      bad.push_back("schema " + std::to_string(i) + " repeats an attribute");
    if (e.empty()) bad.push_back("schema " + std::to_string(i) + " is empty");
    for (const auto& a : e) {
      if (!attrs.count(a))
        bad.push_back("schema attribute not declared: " + a);
      covered.insert(a);
    }
  }
  if (covered != attrs)
    bad.push_back("attributes must equal the union of the schemas");
  if (q.output.empty()) bad.push_back("output attribute list is empty");
  std::set<std::string> outs(q.output.begin(), q.output.end());
  if (outs.size() != q.output.size())
    bad.push_back("duplicate output attributes");
  for (const auto& a : q.output)
    if (!attrs.count(a)) bad.push_back("output attribute not declared: " + a);
  return bad;
}

// --- GYO reduction ----------------------------------------------------------

// Runs the GYO ear-removal procedure. On success returns, for every schema
// index, the index of the schema it was folded into (root points at itself).
// Returns nullopt when the hypergraph is cyclic.
inline std::optional<std::vector<size_t>> gyo_reduce(
    const std::vector<Schema>& schemas) {
  size_t n = schemas.size();
  if (n == 0) return std::nullopt;
  std::vector<std::set<std::string>> edge(n);
  for (size_t i = 0; i < n; ++i)
    edge[i] = std::set<std::string>(schemas[i].begin(), schemas[i].end());
  std::vector<bool> live(n, true);
  std::vector<size_t> parent(n);
  for (size_t i = 0; i < n; ++i) parent[i] = i;
  size_t live_count = n;

  while (live_count > 1) {
    bool progress = false;
    // Drop attributes that occur in exactly one live edge.
    std::map<std::string, int> occ;
    for (size_t i = 0; i < n; ++i)
      if (live[i])
        for (const auto& a : edge[i]) occ[a]++;
    for (size_t i = 0; i < n; ++i) {
      if (!live[i]) continue;
      for (auto it = edge[i].begin(); it != edge[i].end();) {
        if (occ[*it] == 1) {
          it = edge[i].erase(it);
          progress = true;
        } else {
          ++it;
        }
      }
    }
    // Fold edges contained in another live edge.
    for (size_t i = 0; i < n && live_count > 1; ++i) {
      if (!live[i]) continue;
      for (size_t j = 0; j < n; ++j) {
        if (i == j || !live[j]) continue;
        if (std::includes(edge[j].begin(), edge[j].end(), edge[i].begin(),
                          edge[i].end())) {
          live[i] = false;
          parent[i] = j;
          --live_count;
          progress = true;
          break;
        }
      }
    }
    if (!progress) return std::nullopt;
  }
  return parent;
}

// --- classification ---------------------------------------------------------

namespace detail {

inline bool all_binary(const QuerySpec& q) {
  for (const auto& e : q.relations)
    if (e.size() != 2) return false;
  return true;
}

inline bool set_eq(const std::vector<std::string>& a,
                   const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  return sa == sb;
}

// Two binary schemas sharing exactly one attribute, output = the other two.
inline bool is_matrix(const QuerySpec& q) {
  if (q.relations.size() != 2 || !all_binary(q)) return false;
  const Schema &e1 = q.relations[0], &e2 = q.relations[1];
  std::vector<std::string> shared, rest;
  for (const auto& a : e1)
    (std::find(e2.begin(), e2.end(), a) != e2.end() ? shared : rest)
        .push_back(a);
  for (const auto& a : e2)
    if (std::find(e1.begin(), e1.end(), a) == e1.end()) rest.push_back(a);
  if (shared.size() != 1 || rest.size() != 2) return false;
  return set_eq(q.output, rest);
}

// k binary schemas through one center; output = all leaves.
inline bool is_star(const QuerySpec& q, u32* k_out) {
  size_t k = q.relations.size();
  if (k < 2 || !all_binary(q)) return false;
  for (const auto& center : q.relations[0]) {
    bool in_all = true;
    for (const auto& e : q.relations)
      if (std::find(e.begin(), e.end(), center) == e.end()) in_all = false;
    if (!in_all) continue;
    std::vector<std::string> leaves;
    bool ok = true;
    for (const auto& e : q.relations) {
      const std::string& leaf = (e[0] == center) ? e[1] : e[0];
      if (leaf == center ||
          std::find(leaves.begin(), leaves.end(), leaf) != leaves.end())
        ok = false;
      leaves.push_back(leaf);
    }
    if (ok && set_eq(q.output, leaves)) {
      *k_out = u32(k);
      return true;
    }
  }
  return false;
}

// Binary schemas forming a simple path; output = the two endpoints.
// Fills `order` with schema indices from one endpoint to the other and
// `attrs` with the k+1 path attributes when requested.
inline bool is_chain(const QuerySpec& q, u32* k_out,
                     std::vector<size_t>* order = nullptr,
                     std::vector<std::string>* attrs = nullptr) {
  size_t k = q.relations.size();
  if (k < 2 || !all_binary(q)) return false;
  std::map<std::string, std::vector<size_t>> incident;
  for (size_t i = 0; i < k; ++i)
    for (const auto& a : q.relations[i]) incident[a].push_back(i);
  std::vector<std::string> endpoints;
  for (const auto& [a, es] : incident) {
    if (es.size() == 1)
      endpoints.push_back(a);
    else if (es.size() != 2)
      return false;
  }
  if (endpoints.size() != 2) return false;
  if (incident.size() != k + 1) return false;
  // Walk the path from the lexicographically smaller endpoint.
  std::sort(endpoints.begin(), endpoints.end());
  std::string cur = endpoints[0];
  std::vector<bool> used(k, false);
  std::vector<size_t> path;
  std::vector<std::string> path_attrs{cur};
  for (size_t step = 0; step < k; ++step) {
    i64 next_edge = -1;
    for (size_t e : incident[cur])
      if (!used[e]) next_edge = i64(e);
    if (next_edge < 0) return false;
    used[size_t(next_edge)] = true;
    path.push_back(size_t(next_edge));
    const Schema& e = q.relations[size_t(next_edge)];
    cur = (e[0] == cur) ? e[1] : e[0];
    path_attrs.push_back(cur);
  }
  if (cur != endpoints[1]) return false;  // disconnected or revisits
  if (!set_eq(q.output, endpoints)) return false;
  *k_out = u32(k);
  if (order) *order = path;
  if (attrs) *attrs = path_attrs;
  return true;
}

}  // namespace detail

// Shape classifier. Matrix wins for two-relation queries (a 2-star and a
// 2-chain are the same query), then star, then chain, then anything with a
// successful GYO reduction. Cyclic queries are reported as unsupported.
inline QueryShape classify_query(const QuerySpec& q) {
  auto bad = validate_query(q);
  if (!bad.empty()) raise(ErrorKind::invalid_query, bad.front());
  u32 k = 0;
  if (detail::is_matrix(q)) return {ShapeKind::matrix, 2};
  if (detail::is_star(q, &k) && k >= 3) return {ShapeKind::star, k};
  if (detail::is_chain(q, &k) && k >= 3) return {ShapeKind::chain, k};
  if (gyo_reduce(q.relations)) return {ShapeKind::acyclic_general, 0};
  return {ShapeKind::unsupported, 0};
}

// Closed-form fractional edge cover number for the shapes that have one.
// The value is integral for all three supported shapes.
inline u32 rho_star_closed_form(const QueryShape& s) {
  switch (s.kind) {
    case ShapeKind::matrix:
      return 2;
    case ShapeKind::star:
      return s.k;
    case ShapeKind::chain:
      return (s.k + 2) / 2;  // ceil((k+1)/2)
    default:
      raise(ErrorKind::unsupported, "no closed form for this shape");
  }
}

// Instance-level validation; returns human-readable violations (empty = ok).
inline std::vector<std::string> validate_instance(const Instance& inst,
                                                  const QuerySpec& q) {
  std::vector<std::string> bad;
  if (inst.relations.size() != q.relations.size()) {
    bad.push_back("expected " + std::to_string(q.relations.size()) +
                  " relations, got " + std::to_string(inst.relations.size()));
    return bad;
  }
  for (size_t i = 0; i < inst.relations.size(); ++i) {
    const Relation& r = inst.relations[i];
    if (!same_attr_set(r.schema, q.relations[i]))
      bad.push_back("relation " + std::to_string(i) +
                    " schema does not match the query spec");
    std::unordered_set<Tuple, TupleHash> seen;
    for (const Tuple& t : r.rows) {
      if (t.size() != r.schema.size()) {
        bad.push_back("relation " + std::to_string(i) +
                      " has a row of wrong arity");
        break;
      }
      if (!seen.insert(t).second) {
        bad.push_back("relation " + std::to_string(i) +
                      " contains duplicate rows");
        break;
      }
    }
  }
  return bad;
}

}  // namespace joinsketch
