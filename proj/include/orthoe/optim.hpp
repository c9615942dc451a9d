#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "orthoe/model.hpp"
#include "orthoe/tensor.hpp"

namespace orthoe {

/// Adaptive-moment state for one orthogonal block.
struct RiemannianAdamState {
  static constexpr double kDefaultBeta1 = 0.9;
  static constexpr double kDefaultBeta2 = 0.999;
  static constexpr double kDefaultEpsilon = 1e-8;

  DenseMatrix m;  ///< first moment, kept in the tangent space at the current point
  DenseMatrix v;  ///< element-wise second moment, never transported
  std::uint64_t step_count = 0;
  double beta1 = kDefaultBeta1;
  double beta2 = kDefaultBeta2;
  double epsilon = kDefaultEpsilon;
  double lr = 0.02;

  static RiemannianAdamState zeros(std::size_t d, double lr);

  friend bool operator==(const RiemannianAdamState&, const RiemannianAdamState&) = default;
};

/// One Riemannian Adam step on the orthogonal manifold:
///   g = P_X(∇f); m ← β₁m + (1−β₁)g; v ← β₂v + (1−β₂)g⊙g;
///   u = m̂ ⊘ (√v̂ + ε); X′ = Exp_X(−lr·P_X(u)); m ← P_{X′}(m).
/// Throws NumericError for a non-finite gradient.
DenseMatrix riemannian_adam_step(RiemannianAdamState& state, const DenseMatrix& x,
                                 const DenseMatrix& euclid_grad);

struct AdagradState {
  static constexpr double kDefaultEpsilon = 1e-10;

  DenseMatrix accum;
  double lr = 0.2;
  double epsilon = kDefaultEpsilon;

  static AdagradState zeros(std::size_t rows, std::size_t cols, double lr);
};

/// accum ← accum + g⊙g; θ ← θ − lr·g ⊘ (√accum + ε).
DenseMatrix adagrad_step(AdagradState& state, const DenseMatrix& theta,
                         const DenseMatrix& grad);

/// In-place Adagrad kernel over raw spans; the building block of
/// adagrad_step and of the table optimizers.
void adagrad_update(std::span<double> theta, std::span<double> accum,
                    std::span<const double> grad, double lr, double epsilon);

/// Riemannian Adam states for every block of every relation.
class RelationOptimizer {
 public:
  /// Blocks are re-orthogonalized (when drifted past 1e−8) every this many
  /// steps of that block.
  static constexpr std::uint64_t kStabilizeEvery = 1000;

  RelationOptimizer() = default;
  RelationOptimizer(const RelationTable& relations, double lr);

  /// Steps only the relations present in `grads`.
  void step(RelationTable& relations, const RelationGradients& grads);

  std::vector<RiemannianAdamState>& states(RelationId r) { return states_[r]; }
  const std::vector<RiemannianAdamState>& states(RelationId r) const { return states_[r]; }
  std::size_t count() const noexcept { return states_.size(); }

  friend bool operator==(const RelationOptimizer&, const RelationOptimizer&) = default;

 private:
  std::vector<std::vector<RiemannianAdamState>> states_;
};

/// Adagrad accumulators for every entity matrix and bias.
class EntityOptimizer {
 public:
  EntityOptimizer() = default;
  EntityOptimizer(const EntityTable& entities, double lr,
                  double epsilon = AdagradState::kDefaultEpsilon);

  /// Steps only the entities present in `grads`.
  void step(EntityTable& entities, const EntityGradients& grads);

  double lr() const noexcept { return lr_; }
  double epsilon() const noexcept { return epsilon_; }
  std::span<double> accum() noexcept { return accum_; }
  std::span<const double> accum() const noexcept { return accum_; }
  std::span<double> bias_accum() noexcept { return bias_accum_; }
  std::span<const double> bias_accum() const noexcept { return bias_accum_; }

  friend bool operator==(const EntityOptimizer&, const EntityOptimizer&) = default;

 private:
  double lr_ = 0.0;
  double epsilon_ = AdagradState::kDefaultEpsilon;
  std::size_t stride_ = 0;
  std::vector<double> accum_;
  std::vector<double> bias_accum_;
};

/// One mini-batch of the alternating schedule: a relation phase (entities
/// frozen, Riemannian Adam on each touched relation's blocks) followed by an
/// entity phase (relations frozen, Adagrad on touched entity matrices and
/// biases). Both phases evaluate the loss on the same batch. Returns the
/// relation-phase loss, i.e. the loss before this batch's updates.
double alternating_batch(ModelParams& params, std::span<const TrainingExample> batch,
                         RelationOptimizer& rel_opt, EntityOptimizer& ent_opt,
                         std::size_t threads = 1);

/// alternating_batch over every batch in order; returns the summed loss.
double alternating_epoch(ModelParams& params,
                         std::span<const std::vector<TrainingExample>> batches,
                         RelationOptimizer& rel_opt, EntityOptimizer& ent_opt,
                         std::size_t threads = 1);

/// Gram-Schmidt baseline parameters: each relation block is an
/// unconstrained d×d matrix re-orthogonalized by modified Gram-Schmidt on
/// every forward pass.
struct GramSchmidtParams {
  EntityTable entities;
  std::vector<std::vector<DenseMatrix>> free_blocks;  ///< [relation][block]

  /// gram_schmidt applied to every free block.
  RelationTable orthogonalized() const;
};

/// Near-identity free blocks (same draw as init_params) and the same entity
/// initialization as init_params.
GramSchmidtParams init_gram_schmidt_params(const ModelConfig& config,
                                           std::size_t num_entities,
                                           std::size_t num_relations);

/// Adagrad accumulators for the baseline's free relation blocks.
class FreeBlockOptimizer {
 public:
  FreeBlockOptimizer() = default;
  FreeBlockOptimizer(const GramSchmidtParams& params, double lr);
  void step(GramSchmidtParams& params, const RelationGradients& q_grads);

 private:
  double lr_ = 0.0;
  std::vector<std::vector<DenseMatrix>> accum_;
};

/// One joint step of the baseline: a single loss evaluation, gradients
/// pulled back through Gram-Schmidt to the free blocks, then Adagrad on
/// relations and entities together. Returns the batch loss.
double gram_schmidt_joint_batch(GramSchmidtParams& params,
                                std::span<const TrainingExample> batch,
                                FreeBlockOptimizer& rel_opt, EntityOptimizer& ent_opt,
                                std::size_t threads = 1);

}  // namespace orthoe
