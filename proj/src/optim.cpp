#include "orthoe/optim.hpp"

#include <cmath>
#include <string>

#include "orthoe/errors.hpp"
#include "orthoe/manifold.hpp"

namespace orthoe {

RiemannianAdamState RiemannianAdamState::zeros(std::size_t d, double lr) {
  RiemannianAdamState s;
  s.m = DenseMatrix(d, d);
  s.v = DenseMatrix(d, d);
  s.lr = lr;
  return s;
}

DenseMatrix riemannian_adam_step(RiemannianAdamState& state, const DenseMatrix& x,
                                 const DenseMatrix& euclid_grad) {
  if (!euclid_grad.all_finite()) {
    throw NumericError("riemannian_adam_step: non-finite gradient");
  }
  if (state.m.size() == 0) state.m = DenseMatrix(x.rows(), x.cols());
  if (state.v.size() == 0) state.v = DenseMatrix(x.rows(), x.cols());
  if (state.m.rows() != x.rows() || state.m.cols() != x.cols() ||
      state.v.rows() != x.rows() || state.v.cols() != x.cols()) {
    throw ShapeError("riemannian_adam_step: optimizer state differs in shape from parameter");
  }

  const DenseMatrix g = tangent_project(x, euclid_grad).dir;
  ++state.step_count;
  auto m = state.m.values();
  auto v = state.v.values();
  auto gv = g.values();
  for (std::size_t i = 0; i < gv.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gv[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gv[i] * gv[i];
  }

  const double t = static_cast<double>(state.step_count);
  const double m_corr = 1.0 - std::pow(state.beta1, t);
  const double v_corr = 1.0 - std::pow(state.beta2, t);
  DenseMatrix u(x.rows(), x.cols());
  auto uv = u.values();
  for (std::size_t i = 0; i < uv.size(); ++i) {
    const double m_hat = m_corr > 0.0 ? m[i] / m_corr : m[i];
    const double v_hat = v_corr > 0.0 ? v[i] / v_corr : v[i];
    uv[i] = m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
  if (!u.all_finite()) throw NumericError("riemannian_adam_step: non-finite update");

  TangentVector step = tangent_project(x, u);
  step.dir *= -state.lr;
  DenseMatrix next = exp_map(x, step);
  state.m = tangent_project(next, state.m).dir;
  return next;
}

AdagradState AdagradState::zeros(std::size_t rows, std::size_t cols, double lr) {
  AdagradState s;
  s.accum = DenseMatrix(rows, cols);
  s.lr = lr;
  return s;
}

void adagrad_update(std::span<double> theta, std::span<double> accum,
                    std::span<const double> grad, double lr, double epsilon) {
  for (std::size_t i = 0; i < theta.size(); ++i) {
    accum[i] += grad[i] * grad[i];
    theta[i] -= lr * grad[i] / (std::sqrt(accum[i]) + epsilon);
  }
}

DenseMatrix adagrad_step(AdagradState& state, const DenseMatrix& theta,
                         const DenseMatrix& grad) {
  if (theta.rows() != grad.rows() || theta.cols() != grad.cols()) {
    throw ShapeError("adagrad_step: gradient differs in shape from parameter");
  }
  if (!grad.all_finite()) throw NumericError("adagrad_step: non-finite gradient");
  if (state.accum.size() == 0) state.accum = DenseMatrix(theta.rows(), theta.cols());
  if (state.accum.rows() != theta.rows() || state.accum.cols() != theta.cols()) {
    throw ShapeError("adagrad_step: accumulator differs in shape from parameter");
  }
  DenseMatrix out = theta;
  adagrad_update(out.values(), state.accum.values(), grad.values(), state.lr, state.epsilon);
  return out;
}

// ---------------------------------------------------------------------------

RelationOptimizer::RelationOptimizer(const RelationTable& relations, double lr) {
  states_.resize(relations.count());
  for (RelationId r = 0; r < relations.count(); ++r) {
    states_[r].assign(relations[r].num_blocks(),
                      RiemannianAdamState::zeros(relations.block_dim(), lr));
  }
}

void RelationOptimizer::step(RelationTable& relations, const RelationGradients& grads) {
  for (std::size_t slot = 0; slot < grads.size(); ++slot) {
    const RelationId r = grads.id(slot);
    BlockDiagOrthogonal& rel = relations[r];
    const auto& blocks = grads.blocks(slot);
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      RiemannianAdamState& st = states_[r][b];
      rel.block(b) = riemannian_adam_step(st, rel.block(b), blocks[b]);
      if (st.step_count % kStabilizeEvery == 0 &&
          orthogonality_residual(rel.block(b)) > BlockDiagOrthogonal::kStabilizeThreshold) {
        rel.block(b) = qr_orthogonal_factor(rel.block(b));
      }
    }
  }
}

EntityOptimizer::EntityOptimizer(const EntityTable& entities, double lr, double epsilon)
    : lr_(lr),
      epsilon_(epsilon),
      stride_(entities.stride()),
      accum_(entities.values().size(), 0.0),
      bias_accum_(entities.count(), 0.0) {}

void EntityOptimizer::step(EntityTable& entities, const EntityGradients& grads) {
  for (std::size_t slot = 0; slot < grads.size(); ++slot) {
    const EntityId e = grads.id(slot);
    auto g = grads.matrix(slot);
    for (double x : g)
      if (!std::isfinite(x)) throw NumericError("entity gradient is not finite");
    adagrad_update(entities.matrix(e), std::span(accum_).subspan(e * stride_, stride_), g,
                   lr_, epsilon_);
    const double gb = grads.bias(slot);
    if (!std::isfinite(gb)) throw NumericError("entity bias gradient is not finite");
    adagrad_update(std::span(&entities.bias(e), 1), std::span(&bias_accum_[e], 1),
                   std::span(&gb, 1), lr_, epsilon_);
  }
}

double alternating_batch(ModelParams& params, std::span<const TrainingExample> batch,
                         RelationOptimizer& rel_opt, EntityOptimizer& ent_opt,
                         std::size_t threads) {
  const LossAndGrads rel_phase = loss_and_grads(params.entities, params.relations, batch,
                                                GradientTarget::kRelations, threads);
  if (!std::isfinite(rel_phase.loss)) throw NumericError("training loss is not finite");
  rel_opt.step(params.relations, rel_phase.relations);

  const LossAndGrads ent_phase = loss_and_grads(params.entities, params.relations, batch,
                                                GradientTarget::kEntities, threads);
  if (!std::isfinite(ent_phase.loss)) throw NumericError("training loss is not finite");
  ent_opt.step(params.entities, ent_phase.entities);
  return rel_phase.loss;
}

double alternating_epoch(ModelParams& params,
                         std::span<const std::vector<TrainingExample>> batches,
                         RelationOptimizer& rel_opt, EntityOptimizer& ent_opt,
                         std::size_t threads) {
  double total = 0.0;
  for (const auto& batch : batches) {
    total += alternating_batch(params, batch, rel_opt, ent_opt, threads);
  }
  return total;
}

// ---------------------------------------------------------------------------
// Gram-Schmidt baseline

RelationTable GramSchmidtParams::orthogonalized() const {
  std::vector<BlockDiagOrthogonal> rels;
  rels.reserve(free_blocks.size());
  for (const auto& blocks : free_blocks) {
    std::vector<DenseMatrix> q;
    q.reserve(blocks.size());
    for (const auto& a : blocks) q.push_back(gram_schmidt(a));
    rels.push_back(BlockDiagOrthogonal::from_blocks_unchecked(std::move(q)));
  }
  return RelationTable(std::move(rels));
}

GramSchmidtParams init_gram_schmidt_params(const ModelConfig& config,
                                           std::size_t num_entities,
                                           std::size_t num_relations) {
  ModelParams p = init_params(config, num_entities, num_relations);
  GramSchmidtParams out{std::move(p.entities), {}};
  out.free_blocks.resize(num_relations);
  for (RelationId r = 0; r < num_relations; ++r) out.free_blocks[r] = p.relations[r].blocks();
  return out;
}

FreeBlockOptimizer::FreeBlockOptimizer(const GramSchmidtParams& params, double lr) : lr_(lr) {
  accum_.resize(params.free_blocks.size());
  for (std::size_t r = 0; r < accum_.size(); ++r) {
    for (const auto& a : params.free_blocks[r]) accum_[r].emplace_back(a.rows(), a.cols());
  }
}

void FreeBlockOptimizer::step(GramSchmidtParams& params, const RelationGradients& q_grads) {
  for (std::size_t slot = 0; slot < q_grads.size(); ++slot) {
    const RelationId r = q_grads.id(slot);
    const auto& dq = q_grads.blocks(slot);
    for (std::size_t b = 0; b < dq.size(); ++b) {
      DenseMatrix& a = params.free_blocks[r][b];
      const DenseMatrix da = gram_schmidt_backward(a, dq[b]);
      if (!da.all_finite()) throw NumericError("Gram-Schmidt gradient is not finite");
      adagrad_update(a.values(), accum_[r][b].values(), da.values(), lr_,
                     AdagradState::kDefaultEpsilon);
    }
  }
}

double gram_schmidt_joint_batch(GramSchmidtParams& params,
                                std::span<const TrainingExample> batch,
                                FreeBlockOptimizer& rel_opt, EntityOptimizer& ent_opt,
                                std::size_t threads) {
  const RelationTable relations = params.orthogonalized();
  const LossAndGrads lg =
      loss_and_grads(params.entities, relations, batch, GradientTarget::kAll, threads);
  if (!std::isfinite(lg.loss)) throw NumericError("training loss is not finite");
  rel_opt.step(params, lg.relations);
  ent_opt.step(params.entities, lg.entities);
  return lg.loss;
}

}  // namespace orthoe
