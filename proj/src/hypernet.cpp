#include "hcrl/hypernet.hpp"

#include <cmath>
#include <string>

#include "hcrl/errors.hpp"

namespace hcrl {

const TaskEmbedding& HypernetState::current() const {
  if (embeddings.empty()) throw StateError("hypernet: no task has started");
  return embeddings.back();
}

const TaskEmbedding& HypernetState::embedding(int task_id) const {
  if (task_id < 1 || task_id > task_index()) {
    throw DataError("hypernet: unknown task id " + std::to_string(task_id));
  }
  return embeddings[static_cast<std::size_t>(task_id - 1)];
}

HypernetState make_hypernet(const MLPSpec& target, std::vector<Index> hidden, Activation activation,
                            double beta_reg, Engine& rng) {
  target.validate();
  HypernetState state;
  state.spec = MLPSpec{kEmbeddingDim, std::move(hidden), target.param_count(), activation};
  state.spec.validate();
  state.theta = xavier_init(state.spec, rng);
  state.beta_reg = beta_reg;
  return state;
}

Params generate(const HypernetState& state, const Eigen::VectorXd& e) {
  if (e.size() != state.spec.input_dim) {
    throw ConfigError("generate: embedding has " + std::to_string(e.size()) + " entries, expected " +
                      std::to_string(state.spec.input_dim));
  }
  return Params{mlp_forward(state.theta, state.spec, e)};
}

Params generate(const HypernetState& state, const TaskEmbedding& e) { return generate(state, e.values); }

namespace {

Eigen::MatrixXd old_embeddings(const HypernetState& state, int count) {
  Eigen::MatrixXd cols(kEmbeddingDim, count);
  for (int i = 0; i < count; ++i) cols.col(i) = state.embeddings[static_cast<std::size_t>(i)].values;
  return cols;
}

void require_snapshot(const HypernetState& state) {
  const int t = state.task_index();
  if (t < 2) return;
  if (!state.snapshot) throw StateError("hypernet: task " + std::to_string(t) + " has no snapshot");
  if (state.snapshot_outputs.cols() != t - 1) {
    throw StateError("hypernet: snapshot outputs do not cover tasks 1.." + std::to_string(t - 1));
  }
}

}  // namespace

double reg_loss(const HypernetState& state) {
  const int t = state.task_index();
  if (t < 2) return 0.0;
  require_snapshot(state);
  const Eigen::MatrixXd now = mlp_forward_batch(state.theta, state.spec, old_embeddings(state, t - 1));
  return state.beta_reg / (t - 1) * (state.snapshot_outputs - now).squaredNorm();
}

TaskEmbedding new_task_embedding(Engine& rng, int task_id) {
  std::normal_distribution<double> normal(0.0, 1.0);
  TaskEmbedding e;
  e.values.resize(kEmbeddingDim);
  for (Index i = 0; i < kEmbeddingDim; ++i) e.values[i] = normal(rng);
  e.task_id = task_id;
  e.trainable = true;
  return e;
}

TaskEmbedding new_task_embedding(std::uint64_t seed, int task_id) {
  Engine rng(seed);
  return new_task_embedding(rng, task_id);
}

void snapshot(HypernetState& state) {
  state.snapshot = Params{state.theta.flat};
  const int n = state.task_index();
  state.snapshot_outputs =
      n > 0 ? mlp_forward_batch(*state.snapshot, state.spec, old_embeddings(state, n))
            : Eigen::MatrixXd(state.spec.output_dim, 0);
}

void begin_task(HypernetState& state, TaskEmbedding e) {
  if (e.task_id != state.task_index() + 1) {
    throw StateError("hypernet: expected task " + std::to_string(state.task_index() + 1) +
                     ", got " + std::to_string(e.task_id));
  }
  if (e.values.size() != kEmbeddingDim) throw ConfigError("hypernet: embedding must be 10-d");
  for (auto& old : state.embeddings) old.trainable = false;
  if (!state.embeddings.empty()) snapshot(state);
  e.trainable = true;
  state.embeddings.push_back(std::move(e));
}

void hypernet_loss_and_grads(const HypernetState& state, const MLPSpec& target, const std::vector<TaskBatch>& parts,
                             DynLoss kind, bool with_reg, HypernetLossGrads& out) {
  if (target.param_count() != state.spec.output_dim) {
    throw ConfigError("hypernet: output size does not match the target network");
  }
  const int t = state.task_index();
  out.loss = out.dyn = out.reg = 0.0;
  out.grad_theta.resize(state.theta.flat.size());
  out.grad_theta.setZero();
  out.grad_e = Eigen::VectorXd::Zero(kEmbeddingDim);

  for (const auto& part : parts) {
    if (part.batch == nullptr || part.batch->empty()) continue;
    const TaskEmbedding& e = state.embedding(part.task_id);
    for (int id : part.batch->task_ids) {
      if (id != part.task_id) throw DataError("hypernet: batch routed through the wrong embedding");
    }
    const DynamicsModel model{target, generate(state, e), *part.norm};
    const DynLossGrad dg = dyn_loss_and_grad(model, *part.batch, kind, part.weight);
    out.dyn += dg.loss;
    const Eigen::MatrixXd grad_in =
        mlp_backward_accumulate(state.theta, state.spec, Eigen::MatrixXd(e.values), Eigen::MatrixXd(dg.grad_theta),
                                out.grad_theta);
    if (e.trainable && part.task_id == t) out.grad_e += grad_in.col(0);
  }

  if (with_reg && t >= 2 && state.beta_reg != 0.0) {
    require_snapshot(state);
    const Eigen::MatrixXd embeds = old_embeddings(state, t - 1);
    const Eigen::MatrixXd diff = mlp_forward_batch(state.theta, state.spec, embeds) - state.snapshot_outputs;
    const double scale = state.beta_reg / (t - 1);
    out.reg = scale * diff.squaredNorm();
    // The snapshot outputs are constants.
    const Eigen::MatrixXd upstream = 2.0 * scale * diff;
    mlp_backward_accumulate(state.theta, state.spec, embeds, upstream, out.grad_theta);
  }

  out.loss = out.dyn + out.reg;
  if (!std::isfinite(out.loss)) throw DivergenceError("hypernet: non-finite loss");
}

HypernetLossGrads hypernet_loss_and_grads(const HypernetState& state, const MLPSpec& target,
                                          const std::vector<TaskBatch>& parts, DynLoss kind,
                                          bool with_reg) {
  HypernetLossGrads out;
  hypernet_loss_and_grads(state, target, parts, kind, with_reg, out);
  return out;
}

HypernetLossGrads total_loss_and_grads(const HypernetState& state, const MLPSpec& target,
                                       const Normalizer& norm, const Batch& batch, DynLoss kind) {
  if (batch.empty()) throw PreconditionError("total_loss_and_grads: empty batch");
  const int t = state.task_index();
  for (int id : batch.task_ids) {
    if (id != t) throw DataError("total_loss_and_grads: batch holds data from another task");
  }
  return hypernet_loss_and_grads(state, target, {TaskBatch{t, &batch, &norm, 1.0}}, kind, true);
}

}  // namespace hcrl
