#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "orthoe/kg_data.hpp"
#include "orthoe/tensor.hpp"

namespace orthoe {

/// Hyperparameters of one model and its training run.
struct ModelConfig {
  std::size_t n = 500;  ///< rows of each entity matrix = relation dimension
  std::size_t m = 1;    ///< columns of each entity matrix
  std::size_t d = 2;    ///< orthogonal block size; must divide n
  std::size_t negative_k = 300;
  double lr_entity = 0.2;
  double lr_relation = 0.02;
  std::size_t batch_size = 500;
  std::size_t max_epochs = 500;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// One n×m matrix and one scalar bias per entity, stored contiguously.
class EntityTable {
 public:
  EntityTable() = default;
  EntityTable(std::size_t count, std::size_t n, std::size_t m);

  std::size_t count() const noexcept { return biases_.size(); }
  std::size_t n() const noexcept { return n_; }
  std::size_t m() const noexcept { return m_; }
  std::size_t stride() const noexcept { return n_ * m_; }

  std::span<double> matrix(EntityId e) { return {values_.data() + e * stride(), stride()}; }
  std::span<const double> matrix(EntityId e) const {
    return {values_.data() + e * stride(), stride()};
  }
  DenseMatrix matrix_copy(EntityId e) const;
  void set_matrix(EntityId e, const DenseMatrix& value);

  double& bias(EntityId e) { return biases_[e]; }
  double bias(EntityId e) const { return biases_[e]; }

  std::span<double> values() noexcept { return values_; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> biases() noexcept { return biases_; }
  std::span<const double> biases() const noexcept { return biases_; }

  friend bool operator==(const EntityTable&, const EntityTable&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::vector<double> values_;
  std::vector<double> biases_;
};

/// One block-diagonal orthogonal matrix per relation, all sharing (n, d).
class RelationTable {
 public:
  RelationTable() = default;
  /// Identity relations. Throws ConfigError unless d divides n.
  RelationTable(std::size_t count, std::size_t n, std::size_t d);
  /// Throws ShapeError when the relations disagree on (n, d).
  explicit RelationTable(std::vector<BlockDiagOrthogonal> relations);

  std::size_t count() const noexcept { return relations_.size(); }
  std::size_t dim() const noexcept { return n_; }
  std::size_t block_dim() const noexcept { return d_; }

  const BlockDiagOrthogonal& operator[](RelationId r) const { return relations_[r]; }
  BlockDiagOrthogonal& operator[](RelationId r) { return relations_[r]; }

  double max_orthogonality_residual() const;
  std::size_t stabilize(double threshold = BlockDiagOrthogonal::kStabilizeThreshold);

  friend bool operator==(const RelationTable&, const RelationTable&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t d_ = 0;
  std::vector<BlockDiagOrthogonal> relations_;
};

struct ModelParams {
  EntityTable entities;
  RelationTable relations;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// s(h,r,t) = −‖e_R·e_H − e_T‖_F + b_h + b_t. Throws IndexError for ids out of range.
double score(const EntityTable& entities, const RelationTable& relations, EntityId h,
             RelationId r, EntityId t);

/// score(h, r, e) for every entity e, rotating the head once.
std::vector<double> score_all_tails(const EntityTable& entities,
                                    const RelationTable& relations, EntityId h,
                                    RelationId r);

/// score(e, r, t) for every entity e. Head-side ranking only.
std::vector<double> score_all_heads(const EntityTable& entities,
                                    const RelationTable& relations, RelationId r,
                                    EntityId t);

/// A positive triple with its sampled corrupted tails.
struct TrainingExample {
  Triple triple;
  std::vector<EntityId> negatives;
};

/// Sparse per-entity gradient accumulator. Slots appear in first-touch
/// order, which keeps reductions deterministic.
class EntityGradients {
 public:
  explicit EntityGradients(std::size_t stride = 0) : stride_(stride) {}

  std::size_t size() const noexcept { return ids_.size(); }
  std::size_t stride() const noexcept { return stride_; }
  EntityId id(std::size_t slot) const { return ids_[slot]; }
  std::span<double> matrix(std::size_t slot) {
    return {values_.data() + slot * stride_, stride_};
  }
  std::span<const double> matrix(std::size_t slot) const {
    return {values_.data() + slot * stride_, stride_};
  }
  double& bias(std::size_t slot) { return biases_[slot]; }
  double bias(std::size_t slot) const { return biases_[slot]; }

  /// Slot for `e`, creating a zero one on first use.
  std::size_t slot_for(EntityId e);
  /// Slot for `e` or size() when absent.
  std::size_t find(EntityId e) const;

  /// Adds `other` slot by slot in its order.
  void merge(const EntityGradients& other);

 private:
  std::size_t stride_;
  std::vector<EntityId> ids_;
  std::vector<double> values_;
  std::vector<double> biases_;
  std::unordered_map<EntityId, std::size_t> slots_;
};

/// Sparse per-relation ambient gradients, one d×d matrix per block.
class RelationGradients {
 public:
  RelationGradients(std::size_t num_blocks = 0, std::size_t block_dim = 0)
      : num_blocks_(num_blocks), block_dim_(block_dim) {}

  std::size_t size() const noexcept { return ids_.size(); }
  RelationId id(std::size_t slot) const { return ids_[slot]; }
  std::vector<DenseMatrix>& blocks(std::size_t slot) { return blocks_[slot]; }
  const std::vector<DenseMatrix>& blocks(std::size_t slot) const { return blocks_[slot]; }

  std::size_t slot_for(RelationId r);
  std::size_t find(RelationId r) const;
  void merge(const RelationGradients& other);

 private:
  std::size_t num_blocks_;
  std::size_t block_dim_;
  std::vector<RelationId> ids_;
  std::vector<std::vector<DenseMatrix>> blocks_;
  std::unordered_map<RelationId, std::size_t> slots_;
};

enum class GradientTarget { kAll, kRelations, kEntities };

struct LossAndGrads {
  double loss = 0.0;
  EntityGradients entities;
  RelationGradients relations;
};

/// Distance below which the distance-term gradient is treated as zero.
inline constexpr double kDistanceCusp = 1e-12;

/// Loss L = Σ log(1 + exp(y·s(h,r,t′))) over each example's positive tail
/// (y = −1) and its sampled negatives (y = +1), summed over the batch,
/// together with analytic gradients for the requested parameter groups.
///
/// Relation gradients are ambient (not yet projected onto the tangent
/// space), one d×d matrix per diagonal block. With `threads` > 1 the batch is
/// split into contiguous chunks whose results are reduced in chunk order.
LossAndGrads loss_and_grads(const EntityTable& entities, const RelationTable& relations,
                            std::span<const TrainingExample> batch,
                            GradientTarget target = GradientTarget::kAll,
                            std::size_t threads = 1);

/// Entity matrices i.i.d. N(0, (1/√n)²), zero biases, near-identity
/// relation blocks from random_orthogonal. Deterministic in config.seed.
ModelParams init_params(const ModelConfig& config, std::size_t num_entities,
                        std::size_t num_relations);

struct ParameterCounts {
  std::uint64_t entity_params_per_entity = 0;  ///< n·m
  std::uint64_t entity_params_total = 0;       ///< |V|·(n·m + 1), biases included
  std::uint64_t relation_params_per_relation = 0;  ///< (d − 1)·n / 2
};

ParameterCounts parameter_counts(const ModelConfig& config, std::size_t num_entities);

/// Numerically stable log(1 + exp(x)).
double softplus(double x) noexcept;
/// Numerically stable 1 / (1 + exp(−x)).
double sigmoid(double x) noexcept;

}  // namespace orthoe
