#pragma once

// Task-conditional hypernetwork: theta = H_Theta(e) for a learned task
// embedding e, plus the output-preserving regularizer that keeps
// H_Theta(e_i) close to a frozen snapshot's outputs for every earlier task.

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hcrl/dynamics.hpp"
#include "hcrl/nn.hpp"
#include "hcrl/rng.hpp"

namespace hcrl {

inline constexpr Index kEmbeddingDim = 10;

struct TaskEmbedding {
  Eigen::VectorXd values;
  int task_id = 0;
  bool trainable = false;

  bool operator==(const TaskEmbedding& o) const {
    return task_id == o.task_id && trainable == o.trainable && values == o.values;
  }
};

struct HypernetState {
  MLPSpec spec;  // input kEmbeddingDim, output = target parameter count
  Params theta;
  std::vector<TaskEmbedding> embeddings;
  std::optional<Params> snapshot;
  double beta_reg = 0.0;
  // H_snapshot(e_i) for i < t, one column each. The snapshot and the old
  // embeddings are frozen for the whole task, so this never goes stale.
  Eigen::MatrixXd snapshot_outputs;

  int task_index() const { return static_cast<int>(embeddings.size()); }
  const TaskEmbedding& current() const;
  const TaskEmbedding& embedding(int task_id) const;
};

/// Xavier-initialized hypernetwork emitting all `target.param_count()`
/// weights from one output layer.
HypernetState make_hypernet(const MLPSpec& target, std::vector<Index> hidden, Activation activation,
                            double beta_reg, Engine& rng);

Params generate(const HypernetState& state, const TaskEmbedding& e);
Params generate(const HypernetState& state, const Eigen::VectorXd& e);

/// (beta / (t-1)) * sum_{i<t} ||H_snapshot(e_i) - H_Theta(e_i)||^2; 0 at t = 1.
double reg_loss(const HypernetState& state);

/// Standard-normal 10-d embedding, marked trainable.
TaskEmbedding new_task_embedding(Engine& rng, int task_id);
TaskEmbedding new_task_embedding(std::uint64_t seed, int task_id);

/// Freezes a deep copy of Theta and caches its outputs on every stored
/// embedding.
void snapshot(HypernetState& state);

/// Task boundary: snapshot when a previous task exists, freeze the current
/// embedding and append `e` as the single trainable one.
void begin_task(HypernetState& state, TaskEmbedding e);

/// A slice of data routed through one task's embedding and normalizer.
struct TaskBatch {
  int task_id = 0;
  const Batch* batch = nullptr;
  const Normalizer* norm = nullptr;
  double weight = 1.0;
};

struct HypernetLossGrads {
  double loss = 0.0;
  double dyn = 0.0;
  double reg = 0.0;
  Eigen::VectorXd grad_theta;
  Eigen::VectorXd grad_e;  // current embedding only; old embeddings are frozen
};

/// Loss over any number of task-routed batches plus (optionally) the
/// regularizer. Gradients reach Theta through every term and the current
/// embedding through the dynamics terms of its own task.
HypernetLossGrads hypernet_loss_and_grads(const HypernetState& state, const MLPSpec& target,
                                          const std::vector<TaskBatch>& parts, DynLoss kind,
                                          bool with_reg);
/// Same, reusing the storage already held by `out`.
void hypernet_loss_and_grads(const HypernetState& state, const MLPSpec& target, const std::vector<TaskBatch>& parts,
                             DynLoss kind, bool with_reg, HypernetLossGrads& out);

/// L_dyn(Theta_t, e_t) on a current-task batch plus L_reg.
HypernetLossGrads total_loss_and_grads(const HypernetState& state, const MLPSpec& target,
                                       const Normalizer& norm, const Batch& batch,
                                       DynLoss kind = DynLoss::MeanNorm);

}  // namespace hcrl
