#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "orthoe/kg_data.hpp"
#include "orthoe/model.hpp"
#include "orthoe/optim.hpp"

namespace orthoe {

/// Splits `train` into shuffled mini-batches for one epoch and draws
/// `config.negative_k` negatives per example. The permutation uses
/// derive_seed(seed, {2, epoch}); batch b's negatives use
/// derive_seed(seed, {3, epoch, b}).
std::vector<std::vector<TrainingExample>> plan_epoch(const TripleSet& train,
                                                     std::size_t num_entities,
                                                     const ModelConfig& config,
                                                     std::size_t epoch);

struct TrainOptions {
  ModelConfig config;
  std::size_t eval_every = 1;
  std::size_t patience = 50;  ///< epochs without a better valid MRR before stopping
  std::size_t threads = 1;
};

struct EpochRecord {
  std::size_t epoch = 0;  ///< 1-based
  double train_loss = 0.0;
  std::optional<double> valid_mrr;
  double seconds = 0.0;
};

/// Everything a checkpoint needs to resume the alternating optimizer.
struct TrainState {
  ModelParams params;
  RelationOptimizer rel_opt;
  EntityOptimizer ent_opt;
  std::size_t epoch = 0;
  double valid_mrr = 0.0;
};

struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
  /// Called after every epoch with the parameters at that point.
  std::function<void(std::size_t epoch, const ModelParams&)> on_params;
  /// Called with the state whenever validation MRR improves (or after the
  /// last epoch when there is no validation split).
  std::function<void(const TrainState&)> on_best;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_valid_mrr = 0.0;
  ModelParams best_params;
  ModelParams final_params;  ///< after the last epoch run
};

/// Alternating Riemannian Adam / Adagrad training with validation every
/// `eval_every` epochs and early stopping. Validates the config first.
TrainResult train_orthogonal(const TripleSet& train, const TripleSet& valid,
                             const FilterIndex& filter, std::size_t num_entities,
                             std::size_t num_relations, const TrainOptions& options,
                             const TrainCallbacks& callbacks = {});

/// The Gram-Schmidt baseline under the same batches, negatives, evaluation
/// schedule and stopping rule. best_params holds the orthogonalized blocks.
TrainResult train_gram_schmidt(const TripleSet& train, const TripleSet& valid,
                               const FilterIndex& filter, std::size_t num_entities,
                               std::size_t num_relations, const TrainOptions& options,
                               const std::function<void(const EpochRecord&)>& on_epoch = {});

}  // namespace orthoe
