#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "orthoe/errors.hpp"
#include "orthoe/trainer.hpp"
#include "support.hpp"
#include "synthetic.hpp"

using namespace orthoe;
using namespace orthoe::testing;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.n = 8;
  c.m = 1;
  c.d = 2;
  c.negative_k = 5;
  c.batch_size = 4;
  c.max_epochs = 3;
  c.seed = 11;
  return c;
}

TrainOptions options(const ModelConfig& c, std::size_t patience = 50) {
  TrainOptions o;
  o.config = c;
  o.patience = patience;
  return o;
}

}  // namespace

TEST(PlanEpoch, CoversEveryTripleOnceWithNegatives) {
  Rng rng(1);
  const Dataset ds = random_kg(30, 3, 100, rng);
  ModelConfig c = small_config();
  c.batch_size = 7;
  const auto batches = plan_epoch(ds.train, 30, c, 1);
  EXPECT_EQ(batches.size(), (ds.train.triples.size() + 6) / 7);
  std::multiset<std::tuple<EntityId, RelationId, EntityId>> seen, want;
  for (const auto& b : batches) {
    EXPECT_LE(b.size(), 7u);
    for (const auto& ex : b) {
      seen.insert({ex.triple.head, ex.triple.relation, ex.triple.tail});
      EXPECT_EQ(ex.negatives.size(), c.negative_k);
      for (EntityId e : ex.negatives) EXPECT_LT(e, 30u);
    }
  }
  for (const Triple& t : ds.train.triples) want.insert({t.head, t.relation, t.tail});
  EXPECT_EQ(seen, want);
}

TEST(PlanEpoch, DeterministicPerEpochAndSeed) {
  Rng rng(2);
  const Dataset ds = random_kg(20, 2, 60, rng);
  const ModelConfig c = small_config();
  auto flat = [&](std::size_t epoch, const ModelConfig& cfg) {
    std::vector<EntityId> out;
    for (const auto& b : plan_epoch(ds.train, 20, cfg, epoch))
      for (const auto& ex : b) {
        out.push_back(ex.triple.head);
        out.insert(out.end(), ex.negatives.begin(), ex.negatives.end());
      }
    return out;
  };
  EXPECT_EQ(flat(1, c), flat(1, c));
  EXPECT_NE(flat(1, c), flat(2, c));
  ModelConfig other = c;
  other.seed = 12;
  EXPECT_NE(flat(1, c), flat(1, other));
}

TEST(TrainOrthogonal, ToySmokeRun) {
  // Three entities in a two-relation toy graph.
  const TripleSet train{Split::kTrain, {{0, 0, 1}, {1, 0, 2}, {2, 1, 0}}};
  const TripleSet valid{Split::kValid, {{0, 1, 2}}};
  const TripleSet* all[] = {&train, &valid};
  const FilterIndex filter = build_filter_index(all);
  std::size_t bests = 0;
  TrainCallbacks cb;
  cb.on_best = [&](const TrainState& st) {
    ++bests;
    EXPECT_LT(st.params.relations.max_orthogonality_residual(), 1e-6);
  };
  const TrainResult res = train_orthogonal(train, valid, filter, 3, 2, options(small_config()), cb);
  EXPECT_EQ(res.history.size(), 3u);
  EXPECT_GE(bests, 1u);
  EXPECT_GE(res.best_epoch, 1u);
  for (const auto& rec : res.history) {
    EXPECT_TRUE(std::isfinite(rec.train_loss));
    ASSERT_TRUE(rec.valid_mrr.has_value());
  }
  EXPECT_EQ(res.final_params.entities.count(), 3u);
}

TEST(TrainOrthogonal, BitwiseDeterministic) {
  Rng rng(3);
  const Dataset ds = random_kg(25, 3, 150, rng);
  const FilterIndex filter = build_filter_index(ds);
  ModelConfig c = small_config();
  c.max_epochs = 4;
  const TrainResult a = train_orthogonal(ds.train, ds.valid, filter, 25, 3, options(c));
  const TrainResult b = train_orthogonal(ds.train, ds.valid, filter, 25, 3, options(c));
  ASSERT_EQ(a.history.size(), b.history.size());
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    EXPECT_EQ(a.history[i].train_loss, b.history[i].train_loss);
    EXPECT_EQ(a.history[i].valid_mrr, b.history[i].valid_mrr);
  }
  EXPECT_EQ(a.final_params, b.final_params);
  EXPECT_EQ(a.best_params, b.best_params);
}

TEST(TrainOrthogonal, EvalScheduleAndNoValidation) {
  Rng rng(4);
  const Dataset ds = random_kg(20, 2, 80, rng);
  const FilterIndex filter = build_filter_index(ds);
  ModelConfig c = small_config();
  c.max_epochs = 7;
  TrainOptions o = options(c);
  o.eval_every = 3;
  const TrainResult res = train_orthogonal(ds.train, ds.valid, filter, 20, 2, o);
  for (const auto& rec : res.history)
    EXPECT_EQ(rec.valid_mrr.has_value(), rec.epoch % 3 == 0 || rec.epoch == 7) << rec.epoch;

  const TripleSet none{Split::kValid, {}};
  const TrainResult nv = train_orthogonal(ds.train, none, filter, 20, 2, o);
  EXPECT_EQ(nv.best_epoch, 7u);
  EXPECT_EQ(nv.history.size(), 7u);
  EXPECT_EQ(nv.best_params, nv.final_params);
  for (const auto& rec : nv.history) EXPECT_FALSE(rec.valid_mrr.has_value());
}

TEST(TrainOrthogonalProperty, EarlyStoppingHonorsPatience) {
  Rng rng(5);
  for (std::size_t patience : {1, 2, 4}) {
    const Dataset ds = random_kg(15, 2, 60, rng);
    ModelConfig c = small_config();
    c.max_epochs = 30;
    const TrainResult res =
        train_orthogonal(ds.train, ds.valid, build_filter_index(ds), 15, 2, options(c, patience));
    ASSERT_GE(res.history.size(), res.best_epoch);
    if (res.history.size() < c.max_epochs) {
      EXPECT_EQ(res.history.size(), res.best_epoch + patience);
    }
    for (const auto& rec : res.history)
      if (rec.valid_mrr) EXPECT_LE(*rec.valid_mrr, res.best_valid_mrr);
  }
}

TEST(TrainOrthogonal, LossFallsOnStructuredGraph) {
  const Dataset ds = composition_kg(10, 8);
  ModelConfig c;
  c.n = 16;
  c.d = 2;
  c.negative_k = 20;
  c.batch_size = 40;
  c.max_epochs = 30;
  c.lr_entity = 0.1;
  c.lr_relation = 0.03;
  const TrainResult res =
      train_orthogonal(ds.train, ds.valid, build_filter_index(ds), 80, 3, options(c));
  // Negatives are redrawn every epoch, so compare averages, not neighbours.
  double tail = 0.0;
  for (std::size_t i = res.history.size() - 5; i < res.history.size(); ++i)
    tail += res.history[i].train_loss / 5;
  EXPECT_LT(tail, 0.5 * res.history.front().train_loss);
}

TEST(TrainOrthogonal, FixedNegativeLossFallsOnSymmetricGraph) {
  const Dataset ds = symmetric_kg();
  ModelConfig c;
  c.n = 16;
  c.d = 2;
  c.negative_k = 50;
  c.batch_size = 10;
  c.lr_entity = 0.05;
  c.lr_relation = 0.04;
  c.max_epochs = 100;
  c.seed = 1;
  // Epoch 0 is never drawn by training, so these negatives stay fixed.
  std::vector<TrainingExample> fixed;
  for (auto& b : plan_epoch(ds.train, 200, c, 0)) fixed.insert(fixed.end(), b.begin(), b.end());
  auto loss = [&](const ModelParams& p) {
    return loss_and_grads(p.entities, p.relations, fixed, GradientTarget::kRelations).loss;
  };
  std::vector<double> trajectory{loss(init_params(c, 200, 1))};
  TrainCallbacks cb;
  cb.on_params = [&](std::size_t, const ModelParams& p) { trajectory.push_back(loss(p)); };
  const TrainOptions o = options(c, c.max_epochs);
  train_orthogonal(ds.train, ds.valid, build_filter_index(ds), 200, 1, o, cb);
  ASSERT_EQ(trajectory.size(), 101u);
  std::size_t falls = 0;
  for (std::size_t i = 1; i < trajectory.size(); ++i) falls += trajectory[i] < trajectory[i - 1];
  EXPECT_GE(falls, 90u) << "first " << trajectory.front() << " last " << trajectory.back();
}

TEST(TrainOrthogonal, ThreadedRunsAreRepeatable) {
  Rng rng(6);
  const Dataset ds = random_kg(25, 3, 120, rng);
  const FilterIndex filter = build_filter_index(ds);
  TrainOptions o = options(small_config());
  o.threads = 3;
  const TrainResult a = train_orthogonal(ds.train, ds.valid, filter, 25, 3, o);
  const TrainResult b = train_orthogonal(ds.train, ds.valid, filter, 25, 3, o);
  EXPECT_EQ(a.final_params, b.final_params);
}

TEST(TrainOrthogonal, RejectsBadInputsBeforeTraining) {
  Rng rng(7);
  const Dataset ds = random_kg(10, 2, 40, rng);
  const FilterIndex filter = build_filter_index(ds);
  ModelConfig c = small_config();
  c.n = 7;
  EXPECT_THROW(train_orthogonal(ds.train, ds.valid, filter, 10, 2, options(c)), ConfigError);
  TrainOptions o = options(small_config());
  o.eval_every = 0;
  EXPECT_THROW(train_orthogonal(ds.train, ds.valid, filter, 10, 2, o), ConfigError);
  o = options(small_config());
  o.patience = 0;
  EXPECT_THROW(train_orthogonal(ds.train, ds.valid, filter, 10, 2, o), ConfigError);
  const TripleSet empty{Split::kTrain, {}};
  EXPECT_THROW(train_orthogonal(empty, ds.valid, filter, 10, 2, options(small_config())),
               PreconditionError);
}

TEST(TrainGramSchmidt, RunsSameScheduleWithOrthogonalOutput) {
  Rng rng(8);
  const Dataset ds = random_kg(20, 2, 100, rng);
  const FilterIndex filter = build_filter_index(ds);
  ModelConfig c = small_config();
  c.max_epochs = 4;
  std::size_t epochs_seen = 0;
  const TrainResult res = train_gram_schmidt(ds.train, ds.valid, filter, 20, 2, options(c),
                                             [&](const EpochRecord&) { ++epochs_seen; });
  EXPECT_EQ(epochs_seen, res.history.size());
  EXPECT_LT(res.best_params.relations.max_orthogonality_residual(), 1e-10);
  const TrainResult again = train_gram_schmidt(ds.train, ds.valid, filter, 20, 2, options(c));
  EXPECT_EQ(res.final_params, again.final_params);
}
