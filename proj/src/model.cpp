#include "orthoe/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <thread>

#include "orthoe/errors.hpp"
#include "orthoe/manifold.hpp"
#include "orthoe/random.hpp"

namespace orthoe {

void ModelConfig::validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(n >= 1, "n must be at least 1");
  require(m >= 1, "m must be at least 1");
  require(d >= 1, "d must be at least 1");
  require(n % d == 0, "n (" + std::to_string(n) + ") must be divisible by d (" +
                          std::to_string(d) + "); pad n to a multiple of d");
  require(negative_k >= 1, "negative_k must be at least 1");
  require(batch_size >= 1, "batch_size must be at least 1");
  require(max_epochs >= 1, "max_epochs must be at least 1");
  require(std::isfinite(lr_entity) && lr_entity > 0.0, "lr_entity must be positive");
  require(std::isfinite(lr_relation) && lr_relation > 0.0, "lr_relation must be positive");
}

// ---------------------------------------------------------------------------
// Tables

EntityTable::EntityTable(std::size_t count, std::size_t n, std::size_t m)
    : n_(n), m_(m), values_(count * n * m, 0.0), biases_(count, 0.0) {}

DenseMatrix EntityTable::matrix_copy(EntityId e) const {
  auto src = matrix(e);
  return DenseMatrix(n_, m_, std::vector<double>(src.begin(), src.end()));
}

void EntityTable::set_matrix(EntityId e, const DenseMatrix& value) {
  if (value.rows() != n_ || value.cols() != m_) {
    throw ShapeError("EntityTable::set_matrix: expected " + std::to_string(n_) + "x" +
                     std::to_string(m_));
  }
  std::copy(value.values().begin(), value.values().end(), matrix(e).begin());
}

RelationTable::RelationTable(std::size_t count, std::size_t n, std::size_t d) : n_(n), d_(d) {
  if (d == 0 || n % d != 0) {
    throw ConfigError("relation dimension " + std::to_string(n) +
                      " is not a multiple of block size " + std::to_string(d));
  }
  relations_.assign(count, BlockDiagOrthogonal(d, n / d));
}

RelationTable::RelationTable(std::vector<BlockDiagOrthogonal> relations)
    : relations_(std::move(relations)) {
  if (relations_.empty()) return;
  n_ = relations_.front().dim();
  d_ = relations_.front().block_dim();
  for (const auto& r : relations_) {
    if (r.dim() != n_ || r.block_dim() != d_) {
      throw ShapeError("RelationTable: relations disagree on (n, d)");
    }
  }
}

double RelationTable::max_orthogonality_residual() const {
  double worst = 0.0;
  for (const auto& r : relations_) worst = std::max(worst, r.max_orthogonality_residual());
  return worst;
}

std::size_t RelationTable::stabilize(double threshold) {
  std::size_t touched = 0;
  for (auto& r : relations_) touched += r.stabilize(threshold);
  return touched;
}

// ---------------------------------------------------------------------------
// Scoring

namespace {

void check_ids(const EntityTable& entities, const RelationTable& relations,
               std::initializer_list<EntityId> es, RelationId r) {
  for (EntityId e : es) {
    if (e >= entities.count()) {
      throw IndexError("entity id " + std::to_string(e) + " out of range [0, " +
                       std::to_string(entities.count()) + ")");
    }
  }
  if (r >= relations.count()) {
    throw IndexError("relation id " + std::to_string(r) + " out of range [0, " +
                     std::to_string(relations.count()) + ")");
  }
  if (relations.dim() != entities.n()) {
    throw ShapeError("relation dimension " + std::to_string(relations.dim()) +
                     " differs from entity rows " + std::to_string(entities.n()));
  }
}

// Shared by every scoring path so single and bulk scores agree bit for bit.
double distance(std::span<const double> a, std::span<const double> b) noexcept {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

}  // namespace

double score(const EntityTable& entities, const RelationTable& relations, EntityId h,
             RelationId r, EntityId t) {
  check_ids(entities, relations, {h, t}, r);
  std::vector<double> rotated(entities.stride());
  block_apply_into(relations[r], entities.matrix(h), entities.m(), rotated);
  return -distance(rotated, entities.matrix(t)) + entities.bias(h) + entities.bias(t);
}

std::vector<double> score_all_tails(const EntityTable& entities,
                                    const RelationTable& relations, EntityId h,
                                    RelationId r) {
  check_ids(entities, relations, {h}, r);
  std::vector<double> rotated(entities.stride());
  block_apply_into(relations[r], entities.matrix(h), entities.m(), rotated);
  std::vector<double> out(entities.count());
  const double bh = entities.bias(h);
  for (EntityId e = 0; e < out.size(); ++e) {
    out[e] = -distance(rotated, entities.matrix(e)) + bh + entities.bias(e);
  }
  return out;
}

std::vector<double> score_all_heads(const EntityTable& entities,
                                    const RelationTable& relations, RelationId r,
                                    EntityId t) {
  check_ids(entities, relations, {t}, r);
  std::vector<double> rotated(entities.stride());
  std::vector<double> out(entities.count());
  const auto tail = entities.matrix(t);
  const double bt = entities.bias(t);
  for (EntityId e = 0; e < out.size(); ++e) {
    block_apply_into(relations[r], entities.matrix(e), entities.m(), rotated);
    out[e] = -distance(rotated, tail) + entities.bias(e) + bt;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gradient containers

std::size_t EntityGradients::slot_for(EntityId e) {
  auto [it, inserted] = slots_.try_emplace(e, ids_.size());
  if (inserted) {
    ids_.push_back(e);
    values_.resize(values_.size() + stride_, 0.0);
    biases_.push_back(0.0);
  }
  return it->second;
}

std::size_t EntityGradients::find(EntityId e) const {
  auto it = slots_.find(e);
  return it == slots_.end() ? ids_.size() : it->second;
}

void EntityGradients::merge(const EntityGradients& other) {
  for (std::size_t s = 0; s < other.size(); ++s) {
    const std::size_t mine = slot_for(other.id(s));
    auto dst = matrix(mine);
    auto src = other.matrix(s);
    for (std::size_t i = 0; i < stride_; ++i) dst[i] += src[i];
    biases_[mine] += other.bias(s);
  }
}

std::size_t RelationGradients::slot_for(RelationId r) {
  auto [it, inserted] = slots_.try_emplace(r, ids_.size());
  if (inserted) {
    ids_.push_back(r);
    blocks_.emplace_back(num_blocks_, DenseMatrix(block_dim_, block_dim_));
  }
  return it->second;
}

std::size_t RelationGradients::find(RelationId r) const {
  auto it = slots_.find(r);
  return it == slots_.end() ? ids_.size() : it->second;
}

void RelationGradients::merge(const RelationGradients& other) {
  for (std::size_t s = 0; s < other.size(); ++s) {
    auto& dst = blocks(slot_for(other.id(s)));
    const auto& src = other.blocks(s);
    for (std::size_t b = 0; b < dst.size(); ++b) dst[b] += src[b];
  }
}

// ---------------------------------------------------------------------------
// Loss

double softplus(double x) noexcept {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace {

LossAndGrads loss_and_grads_serial(const EntityTable& entities,
                                   const RelationTable& relations,
                                   std::span<const TrainingExample> batch,
                                   GradientTarget target) {
  const std::size_t n = entities.n();
  const std::size_t m = entities.m();
  const std::size_t d = relations.block_dim();
  const std::size_t stride = entities.stride();
  const bool want_entities = target != GradientTarget::kRelations;
  const bool want_relations = target != GradientTarget::kEntities;

  LossAndGrads out{0.0, EntityGradients(stride),
                   RelationGradients(d == 0 ? 0 : n / d, d)};
  std::vector<double> rotated(stride);
  std::vector<double> diff(stride);
  std::vector<double> acc(stride);  // Σ −w·D/δ over the example's terms
  std::vector<double> head_grad(stride);

  for (const TrainingExample& ex : batch) {
    const Triple& tr = ex.triple;
    check_ids(entities, relations, {tr.head, tr.tail}, tr.relation);
    const BlockDiagOrthogonal& rel = relations[tr.relation];
    const auto head = entities.matrix(tr.head);
    block_apply_into(rel, head, m, rotated);
    std::fill(acc.begin(), acc.end(), 0.0);
    double head_bias_grad = 0.0;

    auto term = [&](EntityId cand, double y) {
      if (cand >= entities.count()) {
        throw IndexError("negative sample id " + std::to_string(cand) + " out of range");
      }
      const auto tail = entities.matrix(cand);
      double sq = 0.0;
      for (std::size_t i = 0; i < stride; ++i) {
        diff[i] = rotated[i] - tail[i];
        sq += diff[i] * diff[i];
      }
      const double delta = std::sqrt(sq);
      const double s = -delta + entities.bias(tr.head) + entities.bias(cand);
      out.loss += softplus(y * s);
      const double w = y * sigmoid(y * s);  // dℓ/ds
      head_bias_grad += w;
      if (delta < kDistanceCusp) {
        if (want_entities) out.entities.bias(out.entities.slot_for(cand)) += w;
        return;
      }
      const double scale = w / delta;
      for (std::size_t i = 0; i < stride; ++i) acc[i] -= scale * diff[i];
      if (want_entities) {
        const std::size_t slot = out.entities.slot_for(cand);
        auto g = out.entities.matrix(slot);
        for (std::size_t i = 0; i < stride; ++i) g[i] += scale * diff[i];
        out.entities.bias(slot) += w;
      }
    };

    term(tr.tail, -1.0);
    for (EntityId neg : ex.negatives) term(neg, 1.0);

    if (want_entities) {
      // ∂/∂e_H = e_Rᵀ · acc
      block_apply_transposed_into(rel, acc, m, head_grad);
      const std::size_t slot = out.entities.slot_for(tr.head);
      auto g = out.entities.matrix(slot);
      for (std::size_t i = 0; i < stride; ++i) g[i] += head_grad[i];
      out.entities.bias(slot) += head_bias_grad;
    }
    if (want_relations) {
      // ∂/∂X_b = acc_band · e_H_bandᵀ
      auto& blocks = out.relations.blocks(out.relations.slot_for(tr.relation));
      for (std::size_t b = 0; b < blocks.size(); ++b) {
        DenseMatrix& g = blocks[b];
        const std::size_t base = b * d;
        for (std::size_t i = 0; i < d; ++i) {
          const double* a_row = acc.data() + (base + i) * m;
          for (std::size_t j = 0; j < d; ++j) {
            const double* h_row = head.data() + (base + j) * m;
            double sum = 0.0;
            for (std::size_t c = 0; c < m; ++c) sum += a_row[c] * h_row[c];
            g(i, j) += sum;
          }
        }
      }
    }
  }
  return out;
}

}  // namespace

LossAndGrads loss_and_grads(const EntityTable& entities, const RelationTable& relations,
                            std::span<const TrainingExample> batch, GradientTarget target,
                            std::size_t threads) {
  threads = std::max<std::size_t>(1, std::min(threads, batch.size()));
  if (threads == 1) return loss_and_grads_serial(entities, relations, batch, target);

  std::vector<LossAndGrads> parts(threads);
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> workers;
    const std::size_t chunk = (batch.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
      const std::size_t lo = std::min(batch.size(), t * chunk);
      const std::size_t hi = std::min(batch.size(), lo + chunk);
      workers.emplace_back([&, t, lo, hi] {
        try {
          parts[t] = loss_and_grads_serial(entities, relations, batch.subspan(lo, hi - lo),
                                           target);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  LossAndGrads out = std::move(parts[0]);
  for (std::size_t t = 1; t < threads; ++t) {
    out.loss += parts[t].loss;
    out.entities.merge(parts[t].entities);
    out.relations.merge(parts[t].relations);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Initialization and accounting

ModelParams init_params(const ModelConfig& config, std::size_t num_entities,
                        std::size_t num_relations) {
  config.validate();
  ModelParams p{EntityTable(num_entities, config.n, config.m),
                RelationTable(num_relations, config.n, config.d)};

  Rng entity_rng(derive_seed(config.seed, {0}));
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(config.n)));
  for (double& v : p.entities.values()) v = normal(entity_rng);

  for (RelationId r = 0; r < num_relations; ++r) {
    Rng rel_rng(derive_seed(config.seed, {1, r}));
    auto& rel = p.relations[r];
    for (std::size_t b = 0; b < rel.num_blocks(); ++b) {
      rel.block(b) = random_orthogonal(config.d, rel_rng);
    }
  }
  return p;
}

ParameterCounts parameter_counts(const ModelConfig& config, std::size_t num_entities) {
  config.validate();
  ParameterCounts c;
  c.entity_params_per_entity = static_cast<std::uint64_t>(config.n) * config.m;
  c.entity_params_total = static_cast<std::uint64_t>(num_entities) *
                          (c.entity_params_per_entity + 1);
  c.relation_params_per_relation = static_cast<std::uint64_t>(config.d - 1) * config.n / 2;
  return c;
}

}  // namespace orthoe
