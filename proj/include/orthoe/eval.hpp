#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "orthoe/kg_data.hpp"
#include "orthoe/model.hpp"

namespace orthoe {

struct Metrics {
  double mrr = 0.0;
  std::map<int, double> hits_at;  ///< keys 1, 3, 10
  std::size_t count = 0;

  double hits(int k) const { return hits_at.at(k); }
  /// `mrr=<f> h1=<f> h3=<f> h10=<f> n=<count>`
  std::string to_record() const;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Filtered rank of `target` under the mid-tie convention:
///   1 + #{e ∈ C : s_e > s_t} + #{e ∈ C, e ≠ t : s_e = s_t} / 2
/// where C excludes every id in `known_true` other than the target.
///
/// Throws IndexError when target is outside `scores`, and ProtocolError when
/// `known_true` is non-empty but lacks the target (a broken filter index).
double filtered_rank(std::span<const double> scores, EntityId target,
                     std::span<const EntityId> known_true);

/// MRR and Hits@{1,3,10} from ranks. Throws ProtocolError for no ranks.
Metrics metrics_from_ranks(std::span<const double> ranks);

/// Filtered tail rank of every triple in `split`, in split order.
std::vector<double> tail_ranks(const EntityTable& entities, const RelationTable& relations,
                               const TripleSet& split, const FilterIndex& filter,
                               std::size_t threads = 1);

/// Filtered head rank of every triple, against the (tail, relation) → heads
/// index from build_head_filter_index.
std::vector<double> head_ranks(const EntityTable& entities, const RelationTable& relations,
                               const TripleSet& split, const FilterIndex& head_filter,
                               std::size_t threads = 1);

/// Tail-prediction metrics over `split`. Throws ProtocolError for an empty split.
Metrics evaluate(const EntityTable& entities, const RelationTable& relations,
                 const TripleSet& split, const FilterIndex& filter, std::size_t threads = 1);

/// Metrics over tail and head ranks pooled together.
Metrics evaluate_both_sides(const EntityTable& entities, const RelationTable& relations,
                            const TripleSet& split, const FilterIndex& filter,
                            const FilterIndex& head_filter, std::size_t threads = 1);

}  // namespace orthoe
