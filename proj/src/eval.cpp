#include "orthoe/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <thread>

#include "orthoe/errors.hpp"

namespace orthoe {

std::string Metrics::to_record() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "mrr=%.6f h1=%.6f h3=%.6f h10=%.6f n=%zu", mrr, hits(1),
                hits(3), hits(10), count);
  return buf;
}

double filtered_rank(std::span<const double> scores, EntityId target,
                     std::span<const EntityId> known_true) {
  if (target >= scores.size()) {
    throw IndexError("filtered_rank: target " + std::to_string(target) +
                     " outside score vector of length " + std::to_string(scores.size()));
  }
  std::vector<EntityId> known(known_true.begin(), known_true.end());
  if (!std::is_sorted(known.begin(), known.end())) std::sort(known.begin(), known.end());
  known.erase(std::unique(known.begin(), known.end()), known.end());
  if (!known.empty() && !std::binary_search(known.begin(), known.end(), target)) {
    throw ProtocolError("filtered_rank: filter set lacks the target " +
                        std::to_string(target));
  }

  const double st = scores[target];
  std::size_t greater = 0;
  std::size_t equal = 0;
  for (std::size_t e = 0; e < scores.size(); ++e) {
    if (scores[e] > st) {
      ++greater;
    } else if (scores[e] == st && e != target) {
      ++equal;
    }
  }
  for (EntityId k : known) {
    if (k == target || k >= scores.size()) continue;
    if (scores[k] > st) {
      --greater;
    } else if (scores[k] == st) {
      --equal;
    }
  }
  return 1.0 + static_cast<double>(greater) + static_cast<double>(equal) / 2.0;
}

Metrics metrics_from_ranks(std::span<const double> ranks) {
  if (ranks.empty()) throw ProtocolError("cannot compute metrics over an empty split");
  Metrics m;
  m.count = ranks.size();
  double rr = 0.0;
  std::size_t h1 = 0, h3 = 0, h10 = 0;
  for (double r : ranks) {
    rr += 1.0 / r;
    h1 += r <= 1.0;
    h3 += r <= 3.0;
    h10 += r <= 10.0;
  }
  const double n = static_cast<double>(ranks.size());
  m.mrr = rr / n;
  m.hits_at = {{1, h1 / n}, {3, h3 / n}, {10, h10 / n}};
  return m;
}

namespace {

template <typename RankOne>
std::vector<double> parallel_ranks(std::size_t count, std::size_t threads, RankOne rank_one) {
  std::vector<double> ranks(count);
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) ranks[i] = rank_one(i);
    return ranks;
  }
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    for (std::size_t t = 0; t < threads; ++t) {
      workers.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < count; i += threads) ranks[i] = rank_one(i);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return ranks;
}

}  // namespace

std::vector<double> tail_ranks(const EntityTable& entities, const RelationTable& relations,
                               const TripleSet& split, const FilterIndex& filter,
                               std::size_t threads) {
  return parallel_ranks(split.triples.size(), threads, [&](std::size_t i) {
    const Triple& t = split.triples[i];
    const auto scores = score_all_tails(entities, relations, t.head, t.relation);
    return filtered_rank(scores, t.tail, filter.answers(t.head, t.relation));
  });
}

std::vector<double> head_ranks(const EntityTable& entities, const RelationTable& relations,
                               const TripleSet& split, const FilterIndex& head_filter,
                               std::size_t threads) {
  return parallel_ranks(split.triples.size(), threads, [&](std::size_t i) {
    const Triple& t = split.triples[i];
    const auto scores = score_all_heads(entities, relations, t.relation, t.tail);
    return filtered_rank(scores, t.head, head_filter.answers(t.tail, t.relation));
  });
}

Metrics evaluate(const EntityTable& entities, const RelationTable& relations,
                 const TripleSet& split, const FilterIndex& filter, std::size_t threads) {
  if (split.triples.empty()) {
    throw ProtocolError("cannot evaluate an empty " + std::string(split_name(split.split)) +
                        " split");
  }
  return metrics_from_ranks(tail_ranks(entities, relations, split, filter, threads));
}

Metrics evaluate_both_sides(const EntityTable& entities, const RelationTable& relations,
                            const TripleSet& split, const FilterIndex& filter,
                            const FilterIndex& head_filter, std::size_t threads) {
  if (split.triples.empty()) {
    throw ProtocolError("cannot evaluate an empty " + std::string(split_name(split.split)) +
                        " split");
  }
  std::vector<double> ranks = tail_ranks(entities, relations, split, filter, threads);
  const std::vector<double> heads = head_ranks(entities, relations, split, head_filter, threads);
  ranks.insert(ranks.end(), heads.begin(), heads.end());
  return metrics_from_ranks(ranks);
}

}  // namespace orthoe
