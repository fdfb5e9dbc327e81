// Instance generators for the workbench.
//
// Five families. Three of them are planted constructions whose output size is
// known in closed form, so their manifests carry exact OUT / OUT_join values
// that tests can replay against the oracle:
//
//   matrix-cartesian     R1 = A x B, R2 = B x C. OUT = |A|*|C| no matter how
//                        the B column is sized, OUT_join = |B|*OUT.
//   matrix-disjointness  R1 = adom(A) x S_A, R2 = S_B x adom(C) over a shared
//                        B universe. The two sets either share exactly one
//                        planted element (OUT = |A|*|C|) or are disjoint
//                        (OUT = 0).
//   star-disjointness    R_i = adom(A_i) x S_i. A planted element common to
//                        all k sets makes the projection the full product,
//                        OUT = L^k; otherwise the global intersection is
//                        emptied and OUT = 0.
//   chain-d0d1           paired 3-chain instances that differ only in how
//                        many B-C bridge tuples land in the critical region
//                        B_alpha x C_alpha: L for the d0 variant, theta*L for
//                        d1, giving OUT = L*delta vs theta*L*delta. Both
//                        variants are built from one seed and share R1, R3,
//                        and a common prefix of bridge draws, so experiments
//                        on the pair are coupled.
//   zipf-random          generic matrix/star/chain filler with zipf-skewed
//                        value draws; only N is promised.
//
// Values are built as external strings and interned in row-scan order, so
// emitting a generated instance to files and ingesting it back reproduces the
// ids exactly.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "joinsketch/common.hpp"
#include "joinsketch/model.hpp"
#include "joinsketch/rng.hpp"

namespace joinsketch {

struct GeneratorSpec {
  std::string family;
  std::map<std::string, i64> params;
  u64 seed = 0;
};

// n is the realized input size (total rows). out / out_join are present only
// when the family promises them exactly. params echoes the input map with
// defaults filled in, so the manifest is self-describing.
struct GenManifest {
  std::string family;
  std::string variant;  // "d0" / "d1" for the paired family, else empty
  u64 seed = 0;
  u64 n = 0;
  std::optional<u64> out;
  std::optional<u64> out_join;
  std::map<std::string, i64> params;
};

struct GeneratedInstance {
  Instance inst;
  QuerySpec query;
  GenManifest manifest;
};

inline QuerySpec query_matrix() {
  return QuerySpec{{"A", "B", "C"}, {{"A", "B"}, {"B", "C"}}, {"A", "C"}};
}

inline QuerySpec query_star(u32 k) {
  QuerySpec q;
  q.attributes.push_back("B");
  for (u32 i = 1; i <= k; ++i) {
    std::string a = "A" + std::to_string(i);
    q.attributes.push_back(a);
    q.relations.push_back({a, "B"});
    q.output.push_back(a);
  }
  return q;
}

inline QuerySpec query_chain(u32 k) {
  QuerySpec q;
  for (u32 i = 1; i <= k + 1; ++i)
    q.attributes.push_back("A" + std::to_string(i));
  for (u32 i = 1; i <= k; ++i)
    q.relations.push_back(
        {"A" + std::to_string(i), "A" + std::to_string(i + 1)});
  q.output = {"A1", "A" + std::to_string(k + 1)};
  return q;
}

namespace gen_detail {

using NameRow = std::vector<std::string>;

inline void add_relation(Instance& inst, const Schema& schema,
                         const std::vector<NameRow>& rows) {
  Relation r;
  r.schema = schema;
  r.rows.reserve(rows.size());
  for (const NameRow& nr : rows) {
    Tuple t;
    t.reserve(nr.size());
    for (const std::string& s : nr) t.push_back(inst.dict.intern(s));
    r.rows.push_back(std::move(t));
  }
  inst.relations.push_back(std::move(r));
}

inline i64 param_or(const GeneratorSpec& gs, const std::string& key,
                    i64 dflt) {
  auto it = gs.params.find(key);
  return it == gs.params.end() ? dflt : it->second;
}

inline i64 need_param(const GeneratorSpec& gs, const std::string& key) {
  auto it = gs.params.find(key);
  if (it == gs.params.end())
    raise(ErrorKind::invalid_query,
          "generator parameter missing: " + key + " (family " + gs.family +
              ")");
  return it->second;
}

inline void check_keys(const GeneratorSpec& gs,
                       std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : gs.params) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok)
      raise(ErrorKind::invalid_query,
            "unknown parameter for family " + gs.family + ": " + key);
  }
}

inline u64 checked_nonneg(const GeneratorSpec& gs, const std::string& key,
                          i64 v, i64 lo) {
  if (v < lo)
    raise(ErrorKind::out_of_range, "parameter " + key + " for family " +
                                       gs.family + " must be >= " +
                                       std::to_string(lo));
  return u64(v);
}

inline u64 isqrt_exact(u64 x, const std::string& what) {
  u64 r = u64(std::llround(std::sqrt(double(x))));
  while (r > 0 && r * r > x) --r;
  while ((r + 1) * (r + 1) <= x) ++r;
  if (r * r != x) raise(ErrorKind::out_of_range, what);
  return r;
}

inline u64 checked_pow(u64 base, u64 exp, const std::string& what) {
  u128 acc = 1;
  for (u64 i = 0; i < exp; ++i) {
    acc *= base;
    if (acc > u128(~u64(0))) raise(ErrorKind::overflow, what);
  }
  return u64(acc);
}

// s distinct values from [1, m], in draw order.
inline std::vector<u64> floyd_sample(Rng& rng, u64 m, u64 s) {
  std::vector<u64> out;
  out.reserve(s);
  std::unordered_set<u64> seen;
  for (u64 j = m - s + 1; j <= m; ++j) {
    u64 t = rng.range(1, j);
    if (seen.insert(t).second)
      out.push_back(t);
    else {
      seen.insert(j);
      out.push_back(j);
    }
  }
  return out;
}

template <class T>
inline void shuffle_vec(Rng& rng, std::vector<T>& v) {
  for (size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[rng.below(i)]);
}

// count distinct index pairs from [0,nx) x [0,ny), shuffled so that any
// prefix is itself a uniform sample without replacement.
inline std::vector<std::pair<u64, u64>> sample_pairs(Rng& rng, u64 nx, u64 ny,
                                                     u64 count) {
  std::vector<u64> flat = floyd_sample(rng, nx * ny, count);
  std::vector<std::pair<u64, u64>> out;
  out.reserve(count);
  for (u64 f : flat) out.emplace_back((f - 1) / ny, (f - 1) % ny);
  shuffle_vec(rng, out);
  return out;
}

inline std::string vn(const std::string& attr, u64 i) {
  return attr + "_" + std::to_string(i);
}

inline std::string vn2(const std::string& attr, u64 i, u64 j) {
  return attr + "_" + std::to_string(i) + "_" + std::to_string(j);
}

// --- family: matrix-cartesian ----------------------------------------------

inline std::vector<GeneratedInstance> gen_matrix_cartesian(
    const GeneratorSpec& gs) {
  check_keys(gs, {"out", "n"});
  u64 out = checked_nonneg(gs, "out", need_param(gs, "out"), 1);
  u64 n = checked_nonneg(gs, "n", need_param(gs, "n"), 2);
  u64 side = isqrt_exact(out, "matrix-cartesian: out must be a square");
  if (n % (2 * side) != 0)
    raise(ErrorKind::out_of_range,
          "matrix-cartesian: n must be divisible by 2*sqrt(out)");
  u64 b = n / (2 * side);

  GeneratedInstance g;
  g.query = query_matrix();
  std::vector<NameRow> r1, r2;
  r1.reserve(side * b);
  r2.reserve(side * b);
  for (u64 i = 1; i <= side; ++i)
    for (u64 j = 1; j <= b; ++j) r1.push_back({vn("A", i), vn("B", j)});
  for (u64 j = 1; j <= b; ++j)
    for (u64 i = 1; i <= side; ++i) r2.push_back({vn("B", j), vn("C", i)});
  add_relation(g.inst, g.query.relations[0], r1);
  add_relation(g.inst, g.query.relations[1], r2);

  g.manifest = {gs.family, "", gs.seed, n, out, b * out,
                {{"out", i64(out)}, {"n", i64(n)}}};
  return {std::move(g)};
}

// --- family: matrix-disjointness --------------------------------------------

inline std::vector<GeneratedInstance> gen_matrix_disjointness(
    const GeneratorSpec& gs) {
  check_keys(gs, {"side", "m", "planted"});
  u64 side = checked_nonneg(gs, "side", need_param(gs, "side"), 1);
  u64 m = checked_nonneg(gs, "m", need_param(gs, "m"), 4);
  u64 planted = checked_nonneg(gs, "planted", param_or(gs, "planted", 1), 0);
  if (planted > 1)
    raise(ErrorKind::out_of_range, "matrix-disjointness: planted must be 0/1");
  if (m % 4 != 0)
    raise(ErrorKind::out_of_range,
          "matrix-disjointness: m must be divisible by 4");
  u64 s = m / 4;

  Rng rng(gs.seed);
  std::vector<u64> sa = floyd_sample(rng, m, s);
  // Draw S_B from the complement of S_A so the unplanted sets are disjoint by
  // construction, then splice the planted witness in.
  std::set<u64> in_a(sa.begin(), sa.end());
  std::vector<u64> comp;
  comp.reserve(m - s);
  for (u64 v = 1; v <= m; ++v)
    if (!in_a.count(v)) comp.push_back(v);
  std::vector<u64> pick = floyd_sample(rng, comp.size(), s);
  std::vector<u64> sb;
  sb.reserve(s);
  for (u64 p : pick) sb.push_back(comp[p - 1]);
  if (planted) sb[rng.below(s)] = sa[rng.below(s)];

  GeneratedInstance g;
  g.query = query_matrix();
  std::vector<NameRow> r1, r2;
  r1.reserve(side * s);
  r2.reserve(side * s);
  for (u64 i = 1; i <= side; ++i)
    for (u64 e : sa) r1.push_back({vn("A", i), vn("B", e)});
  for (u64 e : sb)
    for (u64 i = 1; i <= side; ++i) r2.push_back({vn("B", e), vn("C", i)});
  add_relation(g.inst, g.query.relations[0], r1);
  add_relation(g.inst, g.query.relations[1], r2);

  u64 out = planted ? side * side : 0;
  g.manifest = {gs.family,
                "",
                gs.seed,
                2 * side * s,
                out,
                out,  // exactly one shared element when planted
                {{"side", i64(side)}, {"m", i64(m)}, {"planted", i64(planted)}}};
  return {std::move(g)};
}

// --- family: star-disjointness ----------------------------------------------

inline std::vector<GeneratedInstance> gen_star_disjointness(
    const GeneratorSpec& gs) {
  check_keys(gs, {"k", "l", "m", "planted"});
  u64 k = checked_nonneg(gs, "k", need_param(gs, "k"), 2);
  u64 l = checked_nonneg(gs, "l", need_param(gs, "l"), 1);
  u64 m = checked_nonneg(gs, "m", need_param(gs, "m"), i64(2 * k));
  u64 planted = checked_nonneg(gs, "planted", param_or(gs, "planted", 1), 0);
  if (planted > 1)
    raise(ErrorKind::out_of_range, "star-disjointness: planted must be 0/1");
  if (m % (2 * k) != 0)
    raise(ErrorKind::out_of_range,
          "star-disjointness: m must be divisible by 2k");
  u64 s = m / (2 * k);

  Rng rng(gs.seed);
  std::vector<std::vector<u64>> sets;
  for (u64 i = 0; i < k; ++i) sets.push_back(floyd_sample(rng, m, s));
  u64 bstar = 0;
  if (planted) {
    bstar = rng.range(1, m);
    for (auto& si : sets) {
      if (std::find(si.begin(), si.end(), bstar) == si.end())
        si[rng.below(s)] = bstar;
    }
  }
  // Empty the global intersection except for the planted witness. Each stray
  // common element is swapped out of S_1 for a value that is neither in S_1
  // nor common to all the other sets, so no new witness can appear.
  std::set<u64> common(sets[0].begin(), sets[0].end());
  for (u64 i = 1; i < k; ++i) {
    std::set<u64> si(sets[i].begin(), sets[i].end()), next;
    for (u64 v : common)
      if (si.count(v)) next.insert(v);
    common = std::move(next);
  }
  std::set<u64> rest(sets[1].begin(), sets[1].end());
  for (u64 i = 2; i < k; ++i) {
    std::set<u64> si(sets[i].begin(), sets[i].end()), next;
    for (u64 v : rest)
      if (si.count(v)) next.insert(v);
    rest = std::move(next);
  }
  std::set<u64> in_first(sets[0].begin(), sets[0].end());
  for (u64 v : common) {
    if (planted && v == bstar) continue;
    u64 fresh = 0;
    for (u64 c = 1; c <= m; ++c)
      if (!in_first.count(c) && !rest.count(c) && !(planted && c == bstar)) {
        fresh = c;
        break;
      }
    for (u64& e : sets[0])
      if (e == v) e = fresh;
    in_first.erase(v);
    in_first.insert(fresh);
  }

  GeneratedInstance g;
  g.query = query_star(u32(k));
  for (u64 i = 0; i < k; ++i) {
    std::string attr = "A" + std::to_string(i + 1);
    std::vector<NameRow> rows;
    rows.reserve(l * s);
    for (u64 j = 1; j <= l; ++j)
      for (u64 e : sets[i]) rows.push_back({vn(attr, j), vn("B", e)});
    add_relation(g.inst, g.query.relations[i], rows);
  }

  u64 full = checked_pow(l, k, "star-disjointness: L^k exceeds 64 bits");
  u64 out = planted ? full : 0;
  g.manifest = {gs.family,
                "",
                gs.seed,
                k * l * s,
                out,
                out,
                {{"k", i64(k)},
                 {"l", i64(l)},
                 {"m", i64(m)},
                 {"planted", i64(planted)}}};
  return {std::move(g)};
}

// --- family: chain-d0d1 ------------------------------------------------------

inline std::vector<GeneratedInstance> gen_chain_d0d1(const GeneratorSpec& gs) {
  check_keys(gs, {"theta", "l", "delta", "n"});
  u64 theta = checked_nonneg(gs, "theta", param_or(gs, "theta", 2), 2);
  u64 l = checked_nonneg(gs, "l", need_param(gs, "l"), 1);
  u64 delta = checked_nonneg(gs, "delta", need_param(gs, "delta"), 1);
  u64 n = checked_nonneg(gs, "n", need_param(gs, "n"), 1);
  u64 sd = isqrt_exact(delta, "chain-d0d1: delta must be a square");
  if (n % sd != 0)
    raise(ErrorKind::out_of_range,
          "chain-d0d1: n must be divisible by sqrt(delta)");
  if (u128(delta) * l * theta > u128(n) * n)
    raise(ErrorKind::out_of_range, "chain-d0d1: need delta*l <= n^2/theta");
  if ((theta + 1) * l > n)
    raise(ErrorKind::out_of_range, "chain-d0d1: need (theta+1)*l <= n");

  u64 na = n / sd;   // |B_alpha| = |C_alpha|
  u64 dom = 3 * n;   // domain size for B and C
  Rng rng(gs.seed);
  std::vector<u64> balpha = floyd_sample(rng, dom, na);
  std::vector<u64> calpha = floyd_sample(rng, dom, na);
  std::set<u64> in_ba(balpha.begin(), balpha.end());
  std::set<u64> in_ca(calpha.begin(), calpha.end());
  std::vector<u64> bbeta, cbeta;
  bbeta.reserve(dom - na);
  cbeta.reserve(dom - na);
  for (u64 v = 1; v <= dom; ++v) {
    if (!in_ba.count(v)) bbeta.push_back(v);
    if (!in_ca.count(v)) cbeta.push_back(v);
  }

  // Four disjoint bridge regions. The larger of the two variant counts is
  // drawn once and shuffled; each variant takes a prefix, which keeps d0 a
  // uniform draw in its own right while coupling the pair.
  auto crit = sample_pairs(rng, na, na, theta * l);
  auto fill_ab = sample_pairs(rng, na, dom - na, n - l);
  auto fill_bc = sample_pairs(rng, dom - na, na, n - l);
  auto corner = sample_pairs(rng, dom - na, dom - na, theta * l);

  std::vector<NameRow> r1, r3;
  r1.reserve(n);
  r3.reserve(n);
  for (u64 b : balpha)
    for (u64 j = 1; j <= sd; ++j) r1.push_back({vn2("A", b, j), vn("B", b)});
  for (u64 c : calpha)
    for (u64 j = 1; j <= sd; ++j) r3.push_back({vn("C", c), vn2("D", c, j)});

  QuerySpec q{{"A", "B", "C", "D"},
              {{"A", "B"}, {"B", "C"}, {"C", "D"}},
              {"A", "D"}};

  std::vector<GeneratedInstance> pair;
  for (int variant = 0; variant < 2; ++variant) {
    u64 planted = variant == 0 ? l : theta * l;
    std::vector<NameRow> r2;
    r2.reserve(2 * n);
    for (u64 i = 0; i < planted; ++i)
      r2.push_back({vn("B", balpha[crit[i].first]),
                    vn("C", calpha[crit[i].second])});
    for (u64 i = 0; i < n - planted; ++i)
      r2.push_back({vn("B", balpha[fill_ab[i].first]),
                    vn("C", cbeta[fill_ab[i].second])});
    for (u64 i = 0; i < n - planted; ++i)
      r2.push_back({vn("B", bbeta[fill_bc[i].first]),
                    vn("C", calpha[fill_bc[i].second])});
    for (u64 i = 0; i < planted; ++i)
      r2.push_back({vn("B", bbeta[corner[i].first]),
                    vn("C", cbeta[corner[i].second])});

    GeneratedInstance g;
    g.query = q;
    add_relation(g.inst, q.relations[0], r1);
    add_relation(g.inst, q.relations[1], r2);
    add_relation(g.inst, q.relations[2], r3);
    g.manifest = {gs.family,
                  variant == 0 ? "d0" : "d1",
                  gs.seed,
                  4 * n,
                  planted * delta,
                  planted * delta,
                  {{"theta", i64(theta)},
                   {"l", i64(l)},
                   {"delta", i64(delta)},
                   {"n", i64(n)}}};
    pair.push_back(std::move(g));
  }
  return pair;
}

// --- family: zipf-random -----------------------------------------------------

inline std::vector<GeneratedInstance> gen_zipf_random(
    const GeneratorSpec& gs) {
  check_keys(gs, {"relations", "rows", "dom", "skew", "chain"});
  u64 k = checked_nonneg(gs, "relations", param_or(gs, "relations", 2), 2);
  u64 rows = checked_nonneg(gs, "rows", need_param(gs, "rows"), 1);
  u64 dom = checked_nonneg(gs, "dom", need_param(gs, "dom"), 1);
  u64 skew = checked_nonneg(gs, "skew", param_or(gs, "skew", 100), 0);
  u64 chain = checked_nonneg(gs, "chain", param_or(gs, "chain", 0), 0);
  if (chain > 1)
    raise(ErrorKind::out_of_range, "zipf-random: chain must be 0/1");
  if (u128(rows) > u128(dom) * dom)
    raise(ErrorKind::out_of_range, "zipf-random: rows exceeds dom^2");

  GeneratedInstance g;
  if (chain)
    g.query = query_chain(u32(k));
  else if (k == 2)
    g.query = query_matrix();
  else
    g.query = query_star(u32(k));

  double s = double(skew) / 100.0;
  std::vector<double> cum(dom);
  double total = 0.0;
  for (u64 v = 1; v <= dom; ++v) {
    total += std::pow(double(v), -s);
    cum[v - 1] = total;
  }
  Rng rng(gs.seed);
  auto draw = [&]() -> u64 {
    double x = rng.uniform01() * total;
    return u64(std::upper_bound(cum.begin(), cum.end(), x) - cum.begin()) + 1;
  };

  for (u64 r = 0; r < k; ++r) {
    const Schema& schema = g.query.relations[r];
    std::unordered_set<u64> seen;
    std::vector<NameRow> out;
    out.reserve(rows);
    u64 attempts = 0, cap = 200 * rows + 10000;
    while (out.size() < rows) {
      if (++attempts > cap)
        raise(ErrorKind::out_of_range,
              "zipf-random: cannot place this many distinct rows");
      u64 a = draw(), b = draw();
      if (!seen.insert(a * (dom + 1) + b).second) continue;
      out.push_back({vn(schema[0], a), vn(schema[1], b)});
    }
    add_relation(g.inst, schema, out);
  }

  g.manifest = {gs.family,
                "",
                gs.seed,
                k * rows,
                std::nullopt,
                std::nullopt,
                {{"relations", i64(k)},
                 {"rows", i64(rows)},
                 {"dom", i64(dom)},
                 {"skew", i64(skew)},
                 {"chain", i64(chain)}}};
  return {std::move(g)};
}

}  // namespace gen_detail

// Most families yield one instance; chain-d0d1 yields the coupled pair in
// d0, d1 order.
inline std::vector<GeneratedInstance> generate(const GeneratorSpec& gs) {
  if (gs.family == "matrix-cartesian")
    return gen_detail::gen_matrix_cartesian(gs);
  if (gs.family == "matrix-disjointness")
    return gen_detail::gen_matrix_disjointness(gs);
  if (gs.family == "star-disjointness")
    return gen_detail::gen_star_disjointness(gs);
  if (gs.family == "chain-d0d1") return gen_detail::gen_chain_d0d1(gs);
  if (gs.family == "zipf-random") return gen_detail::gen_zipf_random(gs);
  raise(ErrorKind::invalid_query, "unknown generator family: " + gs.family);
}

}  // namespace joinsketch
