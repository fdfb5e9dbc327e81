// Command-line front end.
//
// Subcommands: sample, count, exact, gen, verify, bench. Every command loads
// flat files (io.hpp), routes them to an engine picked by --shape (auto uses
// the classifier; an explicit shape forces that engine, which is how matrix
// inputs get cross-checked against the generic acyclic path), and prints one
// JSON document on stdout. Exit codes: 0 success, 1 usage, 2 data errors.
//
// All randomness is derived from --seed, with the JOINSKETCH_SEED environment
// variable as a fallback, so identical argv + seed give byte-identical output.
#pragma once

#include <cstdlib>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "joinsketch/acyclic.hpp"
#include "joinsketch/bench.hpp"
#include "joinsketch/chain.hpp"
#include "joinsketch/generate.hpp"
#include "joinsketch/io.hpp"
#include "joinsketch/matrix.hpp"
#include "joinsketch/matrix_count.hpp"
#include "joinsketch/oracle.hpp"
#include "joinsketch/star.hpp"
#include "joinsketch/star_count.hpp"
#include "joinsketch/tuning.hpp"

namespace joinsketch {

namespace cli_detail {

inline const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::empty_relation: return "empty_relation";
    case ErrorKind::out_of_range: return "out_of_range";
    case ErrorKind::schema_mismatch: return "schema_mismatch";
    case ErrorKind::invalid_query: return "invalid_query";
    case ErrorKind::invalid_instance: return "invalid_instance";
    case ErrorKind::overflow: return "overflow";
    case ErrorKind::io: return "io";
    case ErrorKind::unsupported: return "unsupported";
  }
  return "unknown";
}

inline const char* shape_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::matrix: return "matrix";
    case ShapeKind::star: return "star";
    case ShapeKind::chain: return "chain";
    case ShapeKind::acyclic_general: return "acyclic";
    default: return "unsupported";
  }
}

inline ShapeKind pick_shape(const std::string& flag, const QuerySpec& q) {
  if (flag == "matrix") return ShapeKind::matrix;
  if (flag == "star") return ShapeKind::star;
  if (flag == "chain") return ShapeKind::chain;
  if (flag == "acyclic") return ShapeKind::acyclic_general;
  QueryShape qs = classify_query(q);
  if (qs.kind == ShapeKind::unsupported)
    raise(ErrorKind::unsupported, "query shape is not supported");
  return qs.kind;
}

inline u64 resolve_seed(const CLI::Option* opt, u64 flag_value) {
  if (opt->count()) return flag_value;
  if (const char* env = std::getenv("JOINSKETCH_SEED")) {
    try {
      size_t used = 0;
      u64 v = std::stoull(env, &used);
      if (used != std::string(env).size()) throw std::invalid_argument(env);
      return v;
    } catch (const std::exception&) {
      raise(ErrorKind::out_of_range, "JOINSKETCH_SEED is not an integer");
    }
  }
  return 0;
}

inline nlohmann::json tuple_names(const Instance& inst, const Tuple& t) {
  nlohmann::json arr = nlohmann::json::array();
  for (Value v : t) arr.push_back(inst.dict.name(v));
  return arr;
}

// One sampler with a uniform draw interface across the four engines. The
// chain engine carries its degree-proxy table, built once up front.
class SamplerRig {
 public:
  SamplerRig(const Instance& inst, const QuerySpec& spec, ShapeKind kind,
             MatrixStrategy strat, const EstimatorParams& params,
             Rng& build_rng)
      : kind_(kind),
        strat_(strat),
        budget_(default_sample_budget(inst.total_rows())) {
    switch (kind_) {
      case ShapeKind::matrix:
        mat_ = std::make_unique<MatrixEngine>(inst, spec);
        break;
      case ShapeKind::star:
        star_ = std::make_unique<StarEngine>(inst, spec);
        break;
      case ShapeKind::chain:
        chain_ = std::make_unique<ChainEngine>(inst, spec);
        est_ = approx_count_chain(*chain_, params.epsilon, params.delta,
                                  build_rng);
        break;
      case ShapeKind::acyclic_general:
        acy_ = std::make_unique<AcyclicEngine>(inst, spec);
        break;
      default:
        raise(ErrorKind::unsupported, "no sampler for this query shape");
    }
  }

  std::optional<Tuple> draw(Rng& rng) {
    switch (kind_) {
      case ShapeKind::matrix: return mat_->sample(strat_, budget_, rng);
      case ShapeKind::star: return star_->sample(budget_, rng);
      case ShapeKind::chain:
        if (est_.table.empty()) return std::nullopt;
        return sample_chain(*chain_, est_.table, rng);
      default: return acy_->sample(budget_, rng);
    }
  }

  const OpCounters& counters() const {
    switch (kind_) {
      case ShapeKind::matrix: return mat_->counters();
      case ShapeKind::star: return star_->counters();
      case ShapeKind::chain: return chain_->counters();
      default: return acy_->counters();
    }
  }

 private:
  ShapeKind kind_;
  MatrixStrategy strat_;
  SampleBudget budget_;
  std::unique_ptr<MatrixEngine> mat_;
  std::unique_ptr<StarEngine> star_;
  std::unique_ptr<ChainEngine> chain_;
  ChainEstimate est_;
  std::unique_ptr<AcyclicEngine> acy_;
};

struct CountRun {
  double estimate = 0.0;
  u64 ops = 0;
};

inline CountRun run_count(const Instance& inst, const QuerySpec& spec,
                          ShapeKind kind, const EstimatorParams& params,
                          Rng& rng) {
  CountRun r;
  switch (kind) {
    case ShapeKind::matrix: {
      MatrixEngine eng(inst, spec);
      r.estimate = approx_count_matrix(eng, params, rng);
      r.ops = eng.counters().total();
      break;
    }
    case ShapeKind::star: {
      StarEngine eng(inst, spec);
      r.estimate = approx_count_star(eng, params, rng);
      r.ops = eng.counters().total();
      break;
    }
    case ShapeKind::chain: {
      ChainEngine eng(inst, spec);
      r.estimate = approx_count_chain(eng, params.epsilon, params.delta, rng).out;
      r.ops = eng.counters().total();
      break;
    }
    case ShapeKind::acyclic_general: {
      AcyclicEngine eng(inst, spec);
      r.estimate = approx_count_acyclic(eng, params.epsilon, params.delta, rng);
      r.ops = eng.counters().total();
      break;
    }
    default:
      raise(ErrorKind::unsupported, "no counter for this query shape");
  }
  return r;
}

inline std::map<std::string, i64> parse_params(
    const std::vector<std::string>& kvs) {
  std::map<std::string, i64> params;
  for (const std::string& kv : kvs) {
    size_t eq = kv.find('=');
    if (eq == std::string::npos || eq == 0)
      throw CLI::ValidationError("--param", "expected key=value, got: " + kv);
    try {
      size_t used = 0;
      i64 v = std::stoll(kv.substr(eq + 1), &used);
      if (used != kv.size() - eq - 1) throw std::invalid_argument(kv);
      params[kv.substr(0, eq)] = v;
    } catch (const std::exception&) {
      throw CLI::ValidationError("--param", "value is not an integer: " + kv);
    }
  }
  return params;
}

inline nlohmann::json manifest_json(const GenManifest& m) {
  nlohmann::json doc;
  doc["family"] = m.family;
  if (!m.variant.empty()) doc["variant"] = m.variant;
  doc["seed"] = m.seed;
  doc["n"] = m.n;
  if (m.out) doc["out"] = *m.out;
  if (m.out_join) doc["out_join"] = *m.out_join;
  doc["params"] = m.params;
  return doc;
}

inline nlohmann::json scaling_json(const std::vector<ScalingRow>& table) {
  nlohmann::json rows = nlohmann::json::array();
  for (const ScalingRow& r : table) {
    nlohmann::json row;
    row["n"] = r.n;
    row["out"] = r.out;
    row["delivered"] = r.delivered;
    row["sampler_mean_ops"] = r.sampler_mean_ops;
    row["counter_ops"] = r.counter_ops;
    row["estimate"] = r.estimate;
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace cli_detail

// args excludes the program name. Returns the process exit code; the JSON
// document (or help text) goes to `out`, usage diagnostics to `err`.
inline int cli_run(const std::vector<std::string>& args, std::ostream& out,
                   std::ostream& err) {
  using nlohmann::json;
  namespace cd = cli_detail;

  CLI::App app{"join-project sampling and counting workbench"};
  app.require_subcommand(1);
  app.fallthrough();
  bool pretty = false;
  int threads = 1;
  app.add_flag("--pretty", pretty, "indent the JSON output");
  app.add_option("--threads", threads, "worker threads (engines run serially)")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();

  json doc;

  // --- sample ---------------------------------------------------------------
  auto* sample = app.add_subcommand("sample", "draw uniform projected samples");
  struct {
    std::string query, data, shape = "auto", strategy = "h";
    u64 n = 1, seed = 0;
    double epsilon = 0.2, delta = 0.1;
  } sa;
  sample->add_option("--query", sa.query, "query spec JSON file")->required();
  sample->add_option("--data", sa.data, "dataset directory")->required();
  sample->add_option("--shape", sa.shape, "engine override")
      ->check(CLI::IsMember({"auto", "matrix", "star", "chain", "acyclic"}));
  sample->add_option("--n", sa.n, "number of draws")->capture_default_str();
  auto* sample_seed = sample->add_option("--seed", sa.seed, "RNG seed");
  sample->add_option("--strategy", sa.strategy,
                     "matrix step-one strategy: h (degree-weighted) or l (capped)")
      ->check(CLI::IsMember({"h", "l"}));
  sample->add_option("--epsilon", sa.epsilon, "chain proxy-table accuracy");
  sample->add_option("--delta", sa.delta, "chain proxy-table failure budget");
  sample->callback([&] {
    u64 seed = cd::resolve_seed(sample_seed, sa.seed);
    Dataset ds = load_dataset(sa.data, sa.query);
    ShapeKind kind = cd::pick_shape(sa.shape, ds.query);
    MatrixStrategy strat =
        sa.strategy == "l" ? MatrixStrategy::capped : MatrixStrategy::weighted;
    Rng rng(seed);
    Rng build = rng.stream(1);
    cd::SamplerRig rig(ds.inst, ds.query, kind, strat,
                       {sa.epsilon, sa.delta}, build);
    json samples = json::array();
    u64 failed = 0;
    for (u64 i = 0; i < sa.n; ++i) {
      auto t = rig.draw(rng);
      if (t)
        samples.push_back(cd::tuple_names(ds.inst, *t));
      else
        ++failed;
    }
    doc["command"] = "sample";
    doc["shape"] = cd::shape_name(kind);
    doc["seed"] = seed;
    doc["samples"] = std::move(samples);
    doc["failed"] = failed;
    doc["trials"] = rig.counters().trials;
    doc["accepted"] = rig.counters().accepted;
    doc["runtime_ops"] = rig.counters().total();
  });

  // --- count ------------------------------------------------------------------
  auto* count = app.add_subcommand("count", "approximate the projected size");
  struct {
    std::string query, data, shape = "auto";
    double epsilon = 0.2, delta = 0.1;
    u64 seed = 0;
  } co;
  count->add_option("--query", co.query, "query spec JSON file")->required();
  count->add_option("--data", co.data, "dataset directory")->required();
  count->add_option("--shape", co.shape, "engine override")
      ->check(CLI::IsMember({"auto", "matrix", "star", "chain", "acyclic"}));
  count->add_option("--epsilon", co.epsilon, "relative error")
      ->capture_default_str();
  count->add_option("--delta", co.delta, "failure probability")
      ->capture_default_str();
  auto* count_seed = count->add_option("--seed", co.seed, "RNG seed");
  count->callback([&] {
    u64 seed = cd::resolve_seed(count_seed, co.seed);
    EstimatorParams params{co.epsilon, co.delta};
    check_estimator_params(params);
    Dataset ds = load_dataset(co.data, co.query);
    ShapeKind kind = cd::pick_shape(co.shape, ds.query);
    Rng rng(seed);
    cd::CountRun r = cd::run_count(ds.inst, ds.query, kind, params, rng);
    doc["command"] = "count";
    doc["shape"] = cd::shape_name(kind);
    doc["seed"] = seed;
    doc["epsilon"] = co.epsilon;
    doc["delta"] = co.delta;
    doc["estimate"] = r.estimate;
    doc["runtime_ops"] = r.ops;
  });

  // --- exact ------------------------------------------------------------------
  auto* exact = app.add_subcommand("exact", "brute-force ground truth");
  struct {
    std::string query, data;
  } ex;
  exact->add_option("--query", ex.query, "query spec JSON file")->required();
  exact->add_option("--data", ex.data, "dataset directory")->required();
  exact->callback([&] {
    Dataset ds = load_dataset(ex.data, ex.query);
    OracleReport rep = exact_eval(ds.inst, ds.query);
    doc["command"] = "exact";
    doc["out"] = rep.out;
    doc["out_join"] = rep.out_join;
    if (rep.out <= 1000) {
      json results = json::array();
      for (const Tuple& t : rep.results) {
        json row;
        row["tuple"] = cd::tuple_names(ds.inst, t);
        row["witnesses"] = rep.degree.at(t);
        results.push_back(std::move(row));
      }
      doc["results"] = std::move(results);
    }
  });

  // --- gen --------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen", "generate an instance family");
  struct {
    std::string family, dir;
    std::vector<std::string> params;
    u64 seed = 0;
  } ge;
  gen->add_option("--family", ge.family, "generator family")
      ->required()
      ->check(CLI::IsMember({"matrix-cartesian", "matrix-disjointness",
                             "star-disjointness", "chain-d0d1",
                             "zipf-random"}));
  gen->add_option("--param", ge.params, "family parameter key=value");
  gen->add_option("--out", ge.dir, "output directory")->required();
  auto* gen_seed = gen->add_option("--seed", ge.seed, "RNG seed");
  gen->callback([&] {
    u64 seed = cd::resolve_seed(gen_seed, ge.seed);
    GeneratorSpec gs{ge.family, cd::parse_params(ge.params), seed};
    std::vector<GeneratedInstance> made = generate(gs);
    json instances = json::array();
    for (const GeneratedInstance& g : made) {
      std::filesystem::path dir(ge.dir);
      if (!g.manifest.variant.empty()) dir /= g.manifest.variant;
      emit(g.inst, g.query, dir.string());
      json m = cd::manifest_json(g.manifest);
      std::ofstream mf(dir / "manifest.json");
      if (!mf) raise(ErrorKind::io, "cannot write manifest in " + dir.string());
      mf << m.dump(2) << "\n";
      m["path"] = dir.string();
      instances.push_back(std::move(m));
    }
    doc["command"] = "gen";
    doc["family"] = ge.family;
    doc["seed"] = seed;
    doc["instances"] = std::move(instances);
  });

  // --- verify -----------------------------------------------------------------
  auto* verify = app.add_subcommand("verify", "statistical check suites");
  struct {
    std::string suite, query, data, shape = "auto", family = "matrix-cartesian";
    u64 n = 0, runs = 20, trials = 200, seed = 0;
    double epsilon = 0.2, delta = 0.1;
  } ve;
  verify->add_option("--suite", ve.suite, "uniformity | accuracy | scaling")
      ->required()
      ->check(CLI::IsMember({"uniformity", "accuracy", "scaling"}));
  verify->add_option("--query", ve.query, "query spec JSON file");
  verify->add_option("--data", ve.data, "dataset directory");
  verify->add_option("--shape", ve.shape, "engine override")
      ->check(CLI::IsMember({"auto", "matrix", "star", "chain", "acyclic"}));
  verify->add_option("--n", ve.n, "uniformity sample count (0 = auto)");
  verify->add_option("--runs", ve.runs, "accuracy repetitions")
      ->capture_default_str();
  verify->add_option("--trials", ve.trials, "scaling draws per point")
      ->capture_default_str();
  auto* verify_eps =
      verify->add_option("--epsilon", ve.epsilon, "accuracy target")
          ->capture_default_str();
  auto* verify_delta =
      verify->add_option("--delta", ve.delta, "failure probability")
          ->capture_default_str();
  verify->add_option("--family", ve.family, "scaling generator family");
  auto* verify_seed = verify->add_option("--seed", ve.seed, "RNG seed");
  verify->callback([&] {
    u64 seed = cd::resolve_seed(verify_seed, ve.seed);
    doc["command"] = "verify";
    doc["suite"] = ve.suite;
    doc["seed"] = seed;
    if (ve.suite == "scaling") {
      // The scaling suite cares about cost trends, not tight estimates, so it
      // defaults to a coarser counter than the accuracy suite.
      EstimatorParams params{verify_eps->count() ? ve.epsilon : 0.5,
                             verify_delta->count() ? ve.delta : 0.25};
      check_estimator_params(params);
      doc["family"] = ve.family;
      doc["table"] =
          cd::scaling_json(scaling_probe(ve.family, ve.trials, params, seed));
      return;
    }
    if (ve.query.empty() || ve.data.empty())
      throw CLI::ValidationError("--suite",
                                 ve.suite + " needs --query and --data");
    EstimatorParams params{ve.epsilon, ve.delta};
    check_estimator_params(params);
    Dataset ds = load_dataset(ve.data, ve.query);
    ShapeKind kind = cd::pick_shape(ve.shape, ds.query);
    OracleReport rep = exact_eval(ds.inst, ds.query);
    Rng rng(seed);
    if (ve.suite == "uniformity") {
      if (rep.out > 10000)
        raise(ErrorKind::out_of_range,
              "uniformity suite needs at most 10^4 distinct results");
      if (rep.out == 0)
        raise(ErrorKind::empty_relation,
              "uniformity suite needs a nonempty result set");
      Rng build = rng.stream(1);
      cd::SamplerRig rig(ds.inst, ds.query, kind, MatrixStrategy::weighted,
                         params, build);
      u64 n = ve.n ? ve.n : std::max<u64>(2000, 20 * rep.out);
      UniformityReport ur = uniformity_test(
          rep.results, [&] { return rig.draw(rng); }, n);
      doc["pass"] = ur.pass;
      doc["stat"] = ur.stat;
      doc["threshold"] = ur.threshold;
      doc["dof"] = ur.dof;
      doc["samples"] = ur.samples;
      doc["out_of_set"] = ur.out_of_set;
      doc["failed_draws"] = ur.failed_draws;
      doc["max_abs_dev"] = ur.max_abs_dev;
    } else {
      u64 i = 0;
      AccuracyReport ar = accuracy_trials(
          [&] {
            Rng r = rng.stream(i++);
            return cd::run_count(ds.inst, ds.query, kind, params, r).estimate;
          },
          double(rep.out), ve.epsilon, ve.runs);
      doc["truth"] = rep.out;
      doc["runs"] = ar.runs;
      doc["within"] = ar.within;
      doc["fraction"] = ar.fraction;
      doc["epsilon"] = ve.epsilon;
    }
  });

  // --- bench --------------------------------------------------------------------
  auto* bench = app.add_subcommand("bench", "scaling tables over a ladder");
  struct {
    std::string family = "matrix-cartesian";
    u64 trials = 200, seed = 0;
    double epsilon = 0.5, delta = 0.25;
  } be;
  bench->add_option("--family", be.family, "generator family")
      ->capture_default_str();
  bench->add_option("--trials", be.trials, "draws per point")
      ->capture_default_str();
  bench->add_option("--epsilon", be.epsilon, "counter accuracy")
      ->capture_default_str();
  bench->add_option("--delta", be.delta, "counter failure probability")
      ->capture_default_str();
  auto* bench_seed = bench->add_option("--seed", be.seed, "RNG seed");
  bench->callback([&] {
    u64 seed = cd::resolve_seed(bench_seed, be.seed);
    EstimatorParams params{be.epsilon, be.delta};
    check_estimator_params(params);
    doc["command"] = "bench";
    doc["family"] = be.family;
    doc["seed"] = seed;
    doc["table"] =
        cd::scaling_json(scaling_probe(be.family, be.trials, params, seed));
  });

  // CLI11 wants an argv; callbacks run inside parse, so engine errors surface
  // here as well.
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("joinsketch");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return 1;
  } catch (const Error& e) {
    json ed;
    ed["error"]["kind"] = cd::kind_name(e.kind());
    ed["error"]["message"] = e.what();
    out << ed.dump(pretty ? 2 : -1) << "\n";
    return 2;
  } catch (const std::exception& e) {
    json ed;
    ed["error"]["kind"] = "internal";
    ed["error"]["message"] = e.what();
    out << ed.dump(pretty ? 2 : -1) << "\n";
    return 2;
  }

  out << doc.dump(pretty ? 2 : -1) << "\n";
  return 0;
}

}  // namespace joinsketch
