#include "orthoe/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

#include "orthoe/errors.hpp"
#include "orthoe/eval.hpp"
#include "orthoe/random.hpp"

namespace orthoe {

std::vector<std::vector<TrainingExample>> plan_epoch(const TripleSet& train,
                                                     std::size_t num_entities,
                                                     const ModelConfig& config,
                                                     std::size_t epoch) {
  std::vector<std::size_t> order(train.triples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng shuffle_rng(derive_seed(config.seed, {2, epoch}));
  std::shuffle(order.begin(), order.end(), shuffle_rng);

  std::vector<std::vector<TrainingExample>> batches;
  for (std::size_t start = 0, b = 0; start < order.size(); start += config.batch_size, ++b) {
    const std::size_t end = std::min(order.size(), start + config.batch_size);
    Rng neg_rng(derive_seed(config.seed, {3, epoch, b}));
    std::vector<TrainingExample> batch;
    batch.reserve(end - start);
    for (std::size_t i = start; i < end; ++i) {
      batch.push_back({train.triples[order[i]],
                       sample_negatives(num_entities, config.negative_k, neg_rng)});
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

namespace {

using Clock = std::chrono::steady_clock;

void check_inputs(const TripleSet& train, const TrainOptions& options) {
  options.config.validate();
  if (options.eval_every == 0) throw ConfigError("eval_every must be at least 1");
  if (options.patience == 0) throw ConfigError("patience must be at least 1");
  if (train.triples.empty()) throw PreconditionError("training split is empty");
}

// Shared epoch loop. `run_epoch(epoch)` returns the summed loss and
// `current()` yields the relations/entities to validate.
template <typename RunEpoch, typename Current, typename OnBest>
TrainResult run_training(const TripleSet& train, const TripleSet& valid,
                         const FilterIndex& filter, std::size_t num_entities,
                         const TrainOptions& options,
                         const std::function<void(const EpochRecord&)>& on_epoch,
                         const std::function<void(std::size_t, const ModelParams&)>& on_params,
                         RunEpoch run_epoch, Current current, OnBest on_best) {
  TrainResult result;
  result.best_valid_mrr = -1.0;
  const bool has_valid = !valid.triples.empty();
  for (std::size_t epoch = 1; epoch <= options.config.max_epochs; ++epoch) {
    const auto t0 = Clock::now();
    const auto batches = plan_epoch(train, num_entities, options.config, epoch);
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = run_epoch(batches);

    const bool last = epoch == options.config.max_epochs;
    if (has_valid && (epoch % options.eval_every == 0 || last)) {
      decltype(auto) p = current();
      rec.valid_mrr = evaluate(p.entities, p.relations, valid, filter, options.threads).mrr;
      if (*rec.valid_mrr > result.best_valid_mrr) {
        result.best_valid_mrr = *rec.valid_mrr;
        result.best_epoch = epoch;
        result.best_params = p;
        on_best(epoch, *rec.valid_mrr);
      }
    }
    rec.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (on_params) on_params(epoch, current());

    if (!has_valid && last) {
      result.best_epoch = epoch;
      result.best_valid_mrr = 0.0;
      result.best_params = current();
      on_best(epoch, 0.0);
    }
    if (has_valid && epoch - result.best_epoch >= options.patience) break;
  }
  result.final_params = current();
  return result;
}

}  // namespace

TrainResult train_orthogonal(const TripleSet& train, const TripleSet& valid,
                             const FilterIndex& filter, std::size_t num_entities,
                             std::size_t num_relations, const TrainOptions& options,
                             const TrainCallbacks& callbacks) {
  check_inputs(train, options);
  const ModelConfig& cfg = options.config;
  TrainState state;
  state.params = init_params(cfg, num_entities, num_relations);
  state.rel_opt = RelationOptimizer(state.params.relations, cfg.lr_relation);
  state.ent_opt = EntityOptimizer(state.params.entities, cfg.lr_entity);

  return run_training(
      train, valid, filter, num_entities, options, callbacks.on_epoch, callbacks.on_params,
      [&](const std::vector<std::vector<TrainingExample>>& batches) {
        return alternating_epoch(state.params, batches, state.rel_opt, state.ent_opt,
                                 options.threads);
      },
      [&]() -> const ModelParams& { return state.params; },
      [&](std::size_t epoch, double mrr) {
        state.epoch = epoch;
        state.valid_mrr = mrr;
        if (callbacks.on_best) callbacks.on_best(state);
      });
}

TrainResult train_gram_schmidt(const TripleSet& train, const TripleSet& valid,
                               const FilterIndex& filter, std::size_t num_entities,
                               std::size_t num_relations, const TrainOptions& options,
                               const std::function<void(const EpochRecord&)>& on_epoch) {
  check_inputs(train, options);
  const ModelConfig& cfg = options.config;
  GramSchmidtParams params = init_gram_schmidt_params(cfg, num_entities, num_relations);
  FreeBlockOptimizer rel_opt(params, cfg.lr_entity);
  EntityOptimizer ent_opt(params.entities, cfg.lr_entity);

  return run_training(
      train, valid, filter, num_entities, options, on_epoch, {},
      [&](const std::vector<std::vector<TrainingExample>>& batches) {
        double total = 0.0;
        for (const auto& batch : batches) {
          total += gram_schmidt_joint_batch(params, batch, rel_opt, ent_opt, options.threads);
        }
        return total;
      },
      [&] { return ModelParams{params.entities, params.orthogonalized()}; },
      [](std::size_t, double) {});
}

}  // namespace orthoe
