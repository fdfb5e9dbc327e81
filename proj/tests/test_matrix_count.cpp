#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "joinsketch/matrix_count.hpp"
#include "testutil.hpp"

using namespace joinsketch;
using namespace jstest;

namespace {

// One b of degree 8 in R2, the rest degree 1. N = 24.
Instance skewed_instance() {
  Instance inst;
  Relation r1 = make_rel({"A", "B"}, {});
  Relation r2 = make_rel({"B", "C"}, {});
  for (u64 i = 0; i < 8; ++i) {
    r1.rows.push_back({V(i + 1), V(50)});
    r2.rows.push_back({V(50), V(100 + i)});
  }
  for (u64 i = 0; i < 4; ++i) {
    r1.rows.push_back({V(20 + i), V(60 + i)});
    r2.rows.push_back({V(60 + i), V(200 + i)});
  }
  inst.relations = {r1, r2};
  return inst;
}

std::unordered_set<Value, ValueHash> exact_heavy(const MatrixEngine& eng,
                                                 double threshold) {
  std::unordered_set<Value, ValueHash> out;
  for (Value b : eng.rhs().active_domain(eng.rhs_join_slot()))
    if (double(eng.rhs().degree(eng.rhs_join_slot(), b)) > threshold)
      out.insert(b);
  return out;
}

}  // namespace

TEST_CASE("heavy detection is sound always and complete w.h.p.") {
  Instance inst = skewed_instance();
  MatrixEngine eng(inst, matrix_spec());
  Rng rng(3);

  // Degree-8 value at threshold sqrt(16) = 4: must be found nearly always.
  u64 found = 0;
  for (int run = 0; run < 100; ++run) {
    HeavySet hs = detect_heavy(eng, 16.0, 0.1, rng);
    auto exact = exact_heavy(eng, hs.threshold);
    for (Value b : hs.values) CHECK(exact.count(b) == 1);  // soundness
    if (hs.values.count(V(50))) ++found;
  }
  CHECK(found >= 90);

  // All degrees at most sqrt(Lambda): verification filters everything.
  for (int run = 0; run < 20; ++run) {
    HeavySet hs = detect_heavy(eng, 100.0, 0.1, rng);
    CHECK(hs.values.empty());
  }

  // Soundness on random skewed instances across guesses.
  Rng gen(5);
  for (int i = 0; i < 30; ++i) {
    Instance r = random_instance(matrix_spec(), 30, 6, 1.0, gen);
    MatrixEngine e(r, matrix_spec());
    double lam = std::pow(4.0, 1 + i % 4);
    HeavySet hs = detect_heavy(e, lam, 0.2, gen);
    auto exact = exact_heavy(e, hs.threshold);
    for (Value b : hs.values) CHECK(exact.count(b) == 1);
  }
}

TEST_CASE("heavy view carries the exact heavy join mass") {
  Instance inst = m1_instance();
  MatrixEngine eng(inst, matrix_spec());

  HeavySet none;
  CHECK(build_heavy_view(eng, none).join_size == 0);

  HeavySet b11;
  b11.values = {V(11)};
  HeavyView v = build_heavy_view(eng, b11);
  CHECK(v.join_size == 4);  // 2 * 2
  REQUIRE(v.values.size() == 1);
  CHECK(v.values[0] == V(11));

  HeavySet all;
  all.values = {V(11), V(12), V(13)};
  CHECK(build_heavy_view(eng, all).join_size == eng.join_size());

  // Filtered-oracle cross-check of the split: hs = {11} leaves the light
  // side with rows (1,12),(3,13) / (12,21), so light OUT = 1 and the two
  // sides overlap in exactly (1,21).
  Instance heavy_part, light_part;
  heavy_part.relations.push_back(make_rel({"A", "B"}, {{1, 11}, {2, 11}}));
  heavy_part.relations.push_back(make_rel({"B", "C"}, {{11, 21}, {11, 22}}));
  light_part.relations.push_back(make_rel({"A", "B"}, {{1, 12}, {3, 13}}));
  light_part.relations.push_back(make_rel({"B", "C"}, {{12, 21}}));
  OracleReport h = exact_eval(heavy_part, matrix_spec());
  OracleReport l = exact_eval(light_part, matrix_spec());
  CHECK(h.out == 4);
  CHECK(h.out_join == v.join_size);
  CHECK(l.out == 1);
}

TEST_CASE("threshold rounds are unbiased for fixed trial counts") {
  Instance inst = m1_instance();
  MatrixEngine eng(inst, matrix_spec());
  Rng rng(7);
  CounterBudget budget(eng.counters(), u64(1) << 62);
  BPartition all{};
  const double cap = 4.0;  // sqrt(16)
  const double bound = 7.0 * cap;  // N sqrt(Lambda)
  auto trial = [&](Rng& r) {
    auto t = eng.counter_light_trial(cap, all, r);
    return t && eng.accept(*t, r, &all);
  };
  double sum = 0;
  const int rounds = 10000;
  for (int i = 0; i < rounds; ++i)
    sum += threshold_round(bound, 1000, trial, budget, eng.counters(), rng);
  // Oracle OUT = 4; the invariant asks for 2%.
  CHECK(std::abs(sum / rounds - 4.0) < 0.08);
}

TEST_CASE("threshold counter estimates or certifies below-threshold") {
  QuerySpec q = matrix_spec();
  Rng rng(11);

  SECTION("M1 light view at Lambda 16") {
    Instance inst = m1_instance();
    MatrixEngine eng(inst, q);
    CounterBudget budget(eng.counters(), u64(1) << 62);
    BPartition all{};
    auto trial = [&](Rng& r) {
      auto t = eng.counter_light_trial(4.0, all, r);
      return t && eng.accept(*t, r, &all);
    };
    int in_range = 0;
    for (int run = 0; run < 50; ++run) {
      auto s = approx_count_with_threshold(28.0, 1.0, 49.0, 0.2, 0.1, trial,
                                           budget, eng.counters(), rng);
      REQUIRE(s.has_value());
      if (*s >= 3.2 && *s <= 4.8) ++in_range;
    }
    CHECK(in_range >= 45);
  }

  SECTION("empty view always certifies") {
    Instance inst;
    inst.relations.push_back(make_rel({"A", "B"}, {{1, 11}, {2, 12}}));
    inst.relations.push_back(make_rel({"B", "C"}, {{13, 21}, {14, 22}}));
    MatrixEngine eng(inst, q);
    CounterBudget budget(eng.counters(), u64(1) << 62);
    BPartition all{};
    auto trial = [&](Rng& r) {
      auto t = eng.counter_light_trial(2.0, all, r);
      return t && eng.accept(*t, r, &all);
    };
    for (int run = 0; run < 20; ++run)
      CHECK_FALSE(approx_count_with_threshold(8.0, 1.0, 16.0, 0.3, 0.1, trial,
                                              budget, eng.counters(), rng)
                      .has_value());
    // Zero bound short-circuits without trials.
    CHECK_FALSE(approx_count_with_threshold(0.0, 1.0, 16.0, 0.3, 0.1, trial,
                                            budget, eng.counters(), rng)
                    .has_value());
  }

  SECTION("injective projection with an exact bound is exact") {
    Instance inst;
    Relation r1 = make_rel({"A", "B"}, {}), r2 = make_rel({"B", "C"}, {});
    for (u64 i = 0; i < 16; ++i) {
      r1.rows.push_back({V(i), V(100 + i)});
      r2.rows.push_back({V(100 + i), V(200 + i)});
    }
    inst.relations = {r1, r2};
    MatrixEngine eng(inst, q);
    CounterBudget budget(eng.counters(), u64(1) << 62);
    HeavySet all;
    for (u64 i = 0; i < 16; ++i) all.values.insert(V(100 + i));
    HeavyView view = build_heavy_view(eng, all);
    REQUIRE(view.join_size == 16);
    BPartition part{&all.values, true};
    auto trial = [&](Rng& r) {
      return eng.accept(eng.sample_join_from(*view.sampler, view.values, r), r,
                        &part);
    };
    for (int run = 0; run < 5; ++run) {
      auto s = approx_count_with_threshold(16.0, 1.0, 1024.0, 0.2, 0.1, trial,
                                           budget, eng.counters(), rng);
      REQUIRE(s.has_value());
      CHECK(*s == 16.0);  // every trial succeeds, first valid guess returns
    }
  }
}

TEST_CASE("overlap fraction hits the exact extremes") {
  QuerySpec q = matrix_spec();
  Rng rng(13);

  SECTION("disjoint result sets") {
    Instance inst;
    inst.relations.push_back(make_rel({"A", "B"}, {{1, 11}, {2, 12}}));
    inst.relations.push_back(make_rel({"B", "C"}, {{11, 21}, {12, 22}}));
    MatrixEngine eng(inst, q);
    CounterBudget budget(eng.counters(), u64(1) << 62);
    HeavySet hs;
    hs.values = {V(11)};
    BPartition light{&hs.values, false};
    CHECK(intersect_estimate(eng, hs, light, 2.0, 0.1, 0.1, budget, rng) ==
          0.0);
  }

  SECTION("heavy results cover the light results") {
    Instance inst;
    inst.relations.push_back(make_rel({"A", "B"}, {{1, 11}, {1, 12}}));
    inst.relations.push_back(make_rel({"B", "C"}, {{11, 21}, {12, 21}}));
    MatrixEngine eng(inst, q);
    CounterBudget budget(eng.counters(), u64(1) << 62);
    HeavySet hs;
    hs.values = {V(11)};
    BPartition light{&hs.values, false};
    CHECK(intersect_estimate(eng, hs, light, 2.0, 0.1, 0.1, budget, rng) ==
          1.0);
  }

  SECTION("no heavy values means zero overlap, no sampling") {
    Instance inst = m1_instance();
    MatrixEngine eng(inst, q);
    CounterBudget budget(eng.counters(), 8);  // would blow on any sampling
    HeavySet hs;
    BPartition light{&hs.values, false};
    CHECK(intersect_estimate(eng, hs, light, 2.0, 0.1, 0.1, budget, rng) ==
          0.0);
  }
}

TEST_CASE("guessed estimate is accurate once the guess reaches OUT") {
  Instance inst = m1_instance();
  MatrixEngine eng(inst, matrix_spec());
  Rng rng(17);
  CounterBudget budget(eng.counters(), u64(1) << 62);
  int in_range = 0;
  for (int run = 0; run < 50; ++run) {
    double s = approx_count_matrix_with_guess(eng, 4.0, 0.25, 0.1, budget, rng);
    if (s >= 3.0 && s <= 5.0) ++in_range;
  }
  CHECK(in_range >= 45);
}

TEST_CASE("full counter ladder lands within epsilon") {
  Rng rng(19);

  SECTION("M1") {
    Instance inst = m1_instance();
    MatrixEngine eng(inst, matrix_spec());
    int in_range = 0;
    for (int run = 0; run < 50; ++run) {
      double s = approx_count_matrix(eng, {0.25, 0.1}, rng);
      if (s >= 3.0 && s <= 5.0) ++in_range;
    }
    CHECK(in_range >= 45);
  }

  SECTION("cartesian product instance") {
    // R1 = A x B, R2 = B x C with |A| = |C| = 8, |B| = 4: OUT = 64.
    Instance inst;
    Relation r1 = make_rel({"A", "B"}, {}), r2 = make_rel({"B", "C"}, {});
    for (u64 a = 0; a < 8; ++a)
      for (u64 b = 0; b < 4; ++b) r1.rows.push_back({V(a), V(100 + b)});
    for (u64 b = 0; b < 4; ++b)
      for (u64 c = 0; c < 8; ++c) r2.rows.push_back({V(100 + b), V(200 + c)});
    inst.relations = {r1, r2};
    OracleReport rep = exact_eval(inst, matrix_spec());
    REQUIRE(rep.out == 64);
    MatrixEngine eng(inst, matrix_spec());
    int in_range = 0;
    for (int run = 0; run < 20; ++run) {
      double s = approx_count_matrix(eng, {0.3, 0.2}, rng);
      if (std::abs(s - 64.0) <= 0.3 * 64.0) ++in_range;
    }
    CHECK(in_range >= 16);
  }

  SECTION("single result instance") {
    Instance inst;
    inst.relations.push_back(make_rel({"A", "B"}, {{1, 11}}));
    inst.relations.push_back(make_rel({"B", "C"}, {{11, 21}}));
    MatrixEngine eng(inst, matrix_spec());
    int exact = 0;
    for (int run = 0; run < 20; ++run) {
      double s = approx_count_matrix(eng, {0.2, 0.1}, rng);
      if (std::abs(s - 1.0) <= 0.2) ++exact;
    }
    CHECK(exact >= 18);
  }
}

TEST_CASE("empty instances count zero within budget") {
  Rng rng(23);
  Instance inst;
  inst.relations.push_back(make_rel({"A", "B"}, {{1, 11}, {2, 12}}));
  inst.relations.push_back(make_rel({"B", "C"}, {{13, 21}, {14, 22}}));
  MatrixEngine eng(inst, matrix_spec());
  u64 limit = counter_budget(eng.total_rows(), 0.5, 0.2);
  for (int run = 0; run < 10; ++run)
    CHECK(approx_count_matrix(eng, {0.5, 0.2}, rng) == 0.0);
  CHECK(eng.counters().total() <= 10 * limit + 10 * 1024 * 4);

  Instance with_empty;
  with_empty.relations.push_back(make_rel({"A", "B"}, {}));
  with_empty.relations.push_back(make_rel({"B", "C"}, {{1, 2}}));
  MatrixEngine e2(with_empty, matrix_spec());
  CHECK(approx_count_matrix(e2, {0.3, 0.1}, rng) == 0.0);
  CHECK(e2.counters().total() == 0);  // provably empty, no work
}

TEST_CASE("budget exhaustion aborts the ladder cleanly") {
  Instance inst = m1_instance();
  MatrixEngine eng(inst, matrix_spec());
  Rng rng(29);
  CounterBudget tiny(eng.counters(), 64);
  BPartition all{};
  auto hopeless = [&](Rng& r) {
    auto t = eng.counter_light_trial(64.0, all, r);  // nearly always rejects
    return t && eng.accept(*t, r, &all);
  };
  CHECK_THROWS_AS(approx_count_with_threshold(1e6, 0.01, 49.0, 0.05, 0.01,
                                              hopeless, tiny, eng.counters(),
                                              rng),
                  BudgetExhausted);
}

TEST_CASE("counter is deterministic under a fixed seed") {
  Instance inst = m1_instance();
  MatrixEngine a(inst, matrix_spec()), b(inst, matrix_spec());
  Rng ra(31), rb(31);
  CHECK(approx_count_matrix(a, {0.25, 0.1}, ra) ==
        approx_count_matrix(b, {0.25, 0.1}, rb));
}
