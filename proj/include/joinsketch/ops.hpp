// Primitive-operation counters.
//
// The engines charge one tick per data access of each kind. Budgets and the
// scaling probes read total(); nothing else in the library depends on these
// numbers, so counting stays out of the hot-path control flow.
#pragma once

#include "joinsketch/common.hpp"

namespace joinsketch {

struct OpCounters {
  u64 sample_tuple = 0;   // uniform row draws
  u64 degree = 0;         // degree lookups
  u64 neighbor = 0;       // ordered-neighbor accesses
  u64 test_tuple = 0;     // membership probes
  u64 weighted_draw = 0;  // draws from weighted samplers
  u64 rand = 0;           // bare RandInt / coin flips charged by engines
  u64 sketch_merge = 0;   // per-tuple sketch merges (chain engine)
  u64 sketch_elems = 0;   // elements touched inside sketch merges
  u64 trials = 0;         // sampling trials started
  u64 accepted = 0;       // trials that produced a result

  u64 total() const {
    return sample_tuple + degree + neighbor + test_tuple + weighted_draw +
           rand + sketch_merge + sketch_elems;
  }

  void reset() { *this = OpCounters{}; }

  OpCounters& operator+=(const OpCounters& o) {
    sample_tuple += o.sample_tuple;
    degree += o.degree;
    neighbor += o.neighbor;
    test_tuple += o.test_tuple;
    weighted_draw += o.weighted_draw;
    rand += o.rand;
    sketch_merge += o.sketch_merge;
    sketch_elems += o.sketch_elems;
    trials += o.trials;
    accepted += o.accepted;
    return *this;
  }
};

}  // namespace joinsketch
