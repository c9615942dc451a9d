#pragma once

// Central-difference check of loss_and_grads against the loss value alone.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "orthoe/model.hpp"

namespace orthoe::testing {

struct GradCheckReport {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_rel = 0.0;
  std::string worst_where;
};

/// A component passes when |analytic − numeric| ≤ rel·max(|analytic|, |numeric|),
/// or when both sit below `abs_floor`, the noise level of the central
/// difference itself.
inline GradCheckReport check_gradients(ModelParams params,
                                       const std::vector<TrainingExample>& batch,
                                       double h = 1e-5, double rel = 1e-4,
                                       double abs_floor = 1e-9) {
  const LossAndGrads lg = loss_and_grads(params.entities, params.relations, batch);
  auto loss = [&] { return loss_and_grads(params.entities, params.relations, batch,
                                          GradientTarget::kEntities).loss; };
  GradCheckReport rep;
  auto compare = [&](double analytic, double& slot, const std::string& where) {
    const double saved = slot;
    slot = saved + h;
    const double up = loss();
    slot = saved - h;
    const double down = loss();
    slot = saved;
    const double numeric = (up - down) / (2 * h);
    const double diff = std::abs(analytic - numeric);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    ++rep.checked;
    const bool ok = diff <= rel * scale || diff <= abs_floor;
    if (!ok) ++rep.failed;
    const double r = scale > 0 ? diff / scale : 0.0;
    if (!ok && r > rep.worst_rel) {
      rep.worst_rel = r;
      rep.worst_where = where;
    }
  };

  EntityTable& ent = params.entities;
  for (EntityId e = 0; e < ent.count(); ++e) {
    const std::size_t slot = lg.entities.find(e);
    for (std::size_t i = 0; i < ent.stride(); ++i) {
      const double a = slot < lg.entities.size() ? lg.entities.matrix(slot)[i] : 0.0;
      compare(a, ent.matrix(e)[i], "entity " + std::to_string(e) + "[" + std::to_string(i) + "]");
    }
    const double ab = slot < lg.entities.size() ? lg.entities.bias(slot) : 0.0;
    compare(ab, ent.bias(e), "bias " + std::to_string(e));
  }
  RelationTable& rels = params.relations;
  for (RelationId r = 0; r < rels.count(); ++r) {
    const std::size_t slot = lg.relations.find(r);
    for (std::size_t b = 0; b < rels[r].num_blocks(); ++b) {
      DenseMatrix& blk = rels[r].block(b);
      for (std::size_t i = 0; i < blk.size(); ++i) {
        const double a = slot < lg.relations.size() ? lg.relations.blocks(slot)[b].values()[i]
                                                    : 0.0;
        compare(a, blk.values()[i],
                "relation " + std::to_string(r) + " block " + std::to_string(b) + "[" +
                    std::to_string(i) + "]");
      }
    }
  }
  return rep;
}

/// Random batch over a model's ids; negatives may repeat and may hit the
/// positive tail.
inline std::vector<TrainingExample> random_batch(std::size_t num_entities,
                                                 std::size_t num_relations,
                                                 std::size_t size, std::size_t k,
                                                 std::mt19937_64& rng) {
  std::uniform_int_distribution<EntityId> pe(0, static_cast<EntityId>(num_entities - 1));
  std::uniform_int_distribution<RelationId> pr(0, static_cast<RelationId>(num_relations - 1));
  std::vector<TrainingExample> batch;
  for (std::size_t i = 0; i < size; ++i) {
    TrainingExample ex{{pe(rng), pr(rng), pe(rng)}, {}};
    for (std::size_t j = 0; j < k; ++j) ex.negatives.push_back(pe(rng));
    batch.push_back(std::move(ex));
  }
  return batch;
}

}  // namespace orthoe::testing
