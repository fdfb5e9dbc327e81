// Access layer over one relation: the four constant-time primitives
// (uniform row draw, degree, ordered neighbor access, membership test),
// plus the weighted and without-replacement samplers the engines build on.
//
// Neighbor order is the ingestion order of the rows. All structures are
// immutable after construction and safe to share across threads.
#pragma once

#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "joinsketch/model.hpp"
#include "joinsketch/ops.hpp"
#include "joinsketch/rng.hpp"

namespace joinsketch {

class IndexedRelation {
 public:
  IndexedRelation() = default;

  explicit IndexedRelation(const Relation& r) : schema_(r.schema) {
    rows_.reserve(r.rows.size());
    adjacency_.resize(schema_.size());
    membership_.reserve(r.rows.size() * 2);
    for (auto& m : adjacency_) m.reserve(r.rows.size() * 2);
    for (const Tuple& t : r.rows) {
      if (t.size() != schema_.size())
        raise(ErrorKind::schema_mismatch, "row arity does not match schema");
      u32 id = u32(rows_.size());
      rows_.push_back(t);
      build_ops_ += 1;
      if (!membership_.insert(t).second)
        raise(ErrorKind::invalid_instance, "duplicate row in relation");
      build_ops_ += 1;
      for (size_t s = 0; s < t.size(); ++s) {
        adjacency_[s][t[s]].push_back(id);
        build_ops_ += 1;
      }
    }
  }

  const Schema& schema() const { return schema_; }
  u64 size() const { return rows_.size(); }
  const Tuple& row(u32 id) const { return rows_[id]; }
  u64 build_ops() const { return build_ops_; }

  size_t slot(const std::string& attr) const {
    auto p = slot_of(schema_, attr);
    if (!p) raise(ErrorKind::schema_mismatch, "no such attribute: " + attr);
    return *p;
  }

  // Uniform row id. Empty relation raises.
  u32 sample_row(Rng& rng) const {
    if (rows_.empty()) raise(ErrorKind::empty_relation, "sample on empty relation");
    return u32(rng.below(rows_.size()));
  }

  // |R ⋉ v| on the given attribute slot.
  u64 degree(size_t s, Value v) const {
    const auto& m = adjacency_[s];
    auto it = m.find(v);
    return it == m.end() ? 0 : it->second.size();
  }

  // Row id of the j-th neighbor (1-based) of v on slot s.
  u32 neighbor_row(size_t s, Value v, u64 j) const {
    const auto& m = adjacency_[s];
    auto it = m.find(v);
    if (it == m.end() || j == 0 || j > it->second.size())
      raise(ErrorKind::out_of_range, "neighbor index out of range");
    return it->second[j - 1];
  }

  // For binary relations: the partner value of the j-th neighbor of v.
  Value partner(size_t s, Value v, u64 j) const {
    const Tuple& t = rows_[neighbor_row(s, v, j)];
    return t[1 - s];
  }

  // Full ordered neighbor list (row ids); empty list when v is absent.
  const std::vector<u32>& neighbors(size_t s, Value v) const {
    static const std::vector<u32> kEmpty;
    const auto& m = adjacency_[s];
    auto it = m.find(v);
    return it == m.end() ? kEmpty : it->second;
  }

  bool test_row(const Tuple& t) const {
    if (t.size() != schema_.size())
      raise(ErrorKind::schema_mismatch, "membership test with wrong arity");
    return membership_.count(t) > 0;
  }

  // Active domain on a slot, in first-appearance order.
  std::vector<Value> active_domain(size_t s) const {
    std::vector<Value> out;
    out.reserve(adjacency_[s].size());
    std::unordered_set<u64> seen;
    seen.reserve(adjacency_[s].size() * 2);
    for (const Tuple& t : rows_)
      if (seen.insert(t[s].id).second) out.push_back(t[s]);
    return out;
  }

 private:
  Schema schema_;
  std::vector<Tuple> rows_;
  std::vector<std::unordered_map<Value, std::vector<u32>, ValueHash>> adjacency_;
  std::unordered_set<Tuple, TupleHash> membership_;
  u64 build_ops_ = 0;
};

// Weighted sampler over items 0..n-1 with integer weights. Returns item i
// with probability weight_i / total exactly: small item counts use a prefix
// scan over the weights, larger ones an alias table built with integer
// arithmetic only (thresholds live in [0, total), the spin uses 128-bit
// intermediates), so no draw ever suffers float rounding.
class WeightedSampler {
 public:
  static constexpr size_t kPrefixLimit = 64;

  WeightedSampler() = default;

  explicit WeightedSampler(std::vector<u64> weights)
      : weights_(std::move(weights)) {
    u128 tot = 0;
    for (u64 w : weights_) tot += w;
    if (tot == 0) raise(ErrorKind::empty_relation, "all weights are zero");
    if (tot > u128(~u64(0))) raise(ErrorKind::overflow, "total weight overflow");
    total_ = u64(tot);
    if (weights_.size() > kPrefixLimit) build_alias();
  }

  u64 total() const { return total_; }
  size_t size() const { return weights_.size(); }

  size_t draw(Rng& rng) const {
    if (alias_.empty()) {
      u64 r = rng.below(total_);
      for (size_t i = 0; i < weights_.size(); ++i) {
        if (r < weights_[i]) return i;
        r -= weights_[i];
      }
      return weights_.size() - 1;  // unreachable
    }
    u128 r = rng.below128(u128(total_) * weights_.size());
    size_t col = size_t(r / total_);
    u64 off = u64(r % total_);
    return off < thresh_[col] ? col : alias_[col];
  }

 private:
  void build_alias() {
    size_t n = weights_.size();
    thresh_.assign(n, 0);
    alias_.assign(n, 0);
    // Scaled weights w_i * n distributed over n columns of capacity `total_`.
    std::vector<u128> scaled(n);
    for (size_t i = 0; i < n; ++i) scaled[i] = u128(weights_[i]) * n;
    std::vector<u32> small, large;
    small.reserve(n);
    large.reserve(n);
    for (size_t i = 0; i < n; ++i)
      (scaled[i] < total_ ? small : large).push_back(u32(i));
    while (!small.empty() && !large.empty()) {
      u32 s = small.back();
      small.pop_back();
      u32 l = large.back();
      thresh_[s] = u64(scaled[s]);
      alias_[s] = l;
      scaled[l] -= u128(total_) - scaled[s];
      if (scaled[l] < total_) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (u32 i : large) {
      thresh_[i] = total_;
      alias_[i] = i;
    }
    for (u32 i : small) {  // numerically exact leftovers fill whole columns
      thresh_[i] = total_;
      alias_[i] = i;
    }
  }

  std::vector<u64> weights_;
  u64 total_ = 0;
  std::vector<u64> thresh_;
  std::vector<u32> alias_;
};

// Draws a uniform random permutation of {1..n} lazily: draw(i) costs O(1)
// and only the touched slots of the virtual Fisher-Yates array are stored.
class NoReplacementSampler {
 public:
  explicit NoReplacementSampler(u64 n) : n_(n) {}

  u64 remaining() const { return n_ - drawn_; }
  bool exhausted() const { return drawn_ == n_; }

  // Next element of the permutation (1-based values in {1..n}).
  u64 draw(Rng& rng) {
    if (drawn_ == n_)
      raise(ErrorKind::out_of_range, "without-replacement draw past the end");
    u64 i = drawn_ + 1;
    u64 j = rng.range(i, n_);
    u64 result = slot(j);
    swaps_[j] = slot(i);
    ++drawn_;
    return result;
  }

 private:
  u64 slot(u64 pos) const {
    auto it = swaps_.find(pos);
    return it == swaps_.end() ? pos : it->second;
  }

  u64 n_;
  u64 drawn_ = 0;
  std::unordered_map<u64, u64> swaps_;
};

}  // namespace joinsketch
