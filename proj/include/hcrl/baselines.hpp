#pragma once

// Continual-learning baselines over a multi-head copy of the target
// network: one shared trunk, one linear output head per task.

#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hcrl/dynamics.hpp"
#include "hcrl/nn.hpp"
#include "hcrl/rng.hpp"

namespace hcrl {

/// Flat parameters laid out as [trunk, head_1, ..., head_n]. The trunk is
/// every layer of `spec` but the last; a head is the last layer. Since the
/// last layer sits at the tail of the single-network layout, trunk ⊕ head_i
/// is exactly the single-network parameter vector for task i.
class MultiHeadNet {
 public:
  MultiHeadNet() = default;
  MultiHeadNet(MLPSpec spec, Engine& rng);

  const MLPSpec& spec() const { return spec_; }
  Index trunk_size() const { return trunk_size_; }
  Index head_size() const { return head_size_; }
  int heads() const { return heads_; }
  int active_head() const { return heads_; }

  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }

  /// Appends a Xavier-initialized head; it becomes the active one.
  void add_head(Engine& rng);
  /// trunk ⊕ head_task as a single-network parameter vector.
  Params task_params(int task) const;
  /// Offset of head `task` within params().
  Index head_offset(int task) const;
  /// Embeds a single-network gradient for `task` into a params()-sized vector.
  void scatter(int task, const Eigen::VectorXd& net_grad, Eigen::VectorXd& full_grad) const;

  // Restores a saved network.
  void restore(MLPSpec spec, Eigen::VectorXd params, int heads);

 private:
  MLPSpec spec_;
  Index trunk_size_ = 0;
  Index head_size_ = 0;
  int heads_ = 0;
  Eigen::VectorXd params_;
};

// --- EWC ----------------------------------------------------------------------

struct EWCAnchor {
  Eigen::VectorXd theta_star;
  Eigen::VectorXd fisher;  // diagonal, >= 0
};

struct EWCState {
  std::vector<EWCAnchor> anchors;
  double lambda = 100.0;
};

/// Diagonal empirical Fisher: mean over `items` of the squared per-sample
/// gradient of the dynamics loss for `task`, expressed over net.params().
Eigen::VectorXd empirical_fisher(const MultiHeadNet& net, int task, const Normalizer& norm,
                                 const std::vector<Transition>& items, DynLoss kind = DynLoss::MeanNorm);

/// Appends (theta*, fisher) for the task just finished.
void ewc_consolidate(const MultiHeadNet& net, int task, const Normalizer& norm, const ReplayBuffer& buffer,
                     EWCState& state, DynLoss kind = DynLoss::MeanNorm);

/// (lambda / 2) sum_tasks sum_j F_j (theta_j - theta*_j)^2. Anchors cover a
/// prefix of `theta` (heads added later are not anchored).
double ewc_penalty(const Eigen::VectorXd& theta, const EWCState& state);
/// Adds the penalty gradient to `grad`.
void ewc_penalty_grad(const Eigen::VectorXd& theta, const EWCState& state, Eigen::VectorXd& grad);

// --- SI -----------------------------------------------------------------------

struct SIState {
  Eigen::VectorXd omega;
  Eigen::VectorXd theta_anchor;
  Eigen::VectorXd path_accumulator;
  double xi = 0.1;
  double c = 0.1;
};

SIState make_si(const Eigen::VectorXd& theta, double c, double xi);
/// Extends every vector for parameters appended to theta (new heads).
void si_grow(SIState& state, const Eigen::VectorXd& theta);
/// path += -grad ⊙ (after - before)
void si_track(SIState& state, const Eigen::VectorXd& theta_before, const Eigen::VectorXd& theta_after,
              const Eigen::VectorXd& grad);
/// omega += max(0, path) / ((theta_end - anchor)^2 + xi); re-anchors at theta_end.
void si_consolidate(SIState& state, const Eigen::VectorXd& theta_end);
/// c * sum_j omega_j (theta_j - anchor_j)^2
double si_penalty(const Eigen::VectorXd& theta, const SIState& state);
void si_penalty_grad(const Eigen::VectorXd& theta, const SIState& state, Eigen::VectorXd& grad);

// --- rehearsal ----------------------------------------------------------------

inline constexpr double kCoresetFraction = 0.01;

struct Coreset {
  std::vector<Transition> kept;
  std::vector<std::size_t> per_task;  // how many came from each finished task
};

/// ceil(fraction * n), at least 1 for a non-empty task.
std::size_t coreset_quota(std::size_t n, double fraction = kCoresetFraction);
/// Keeps a uniform sample (without replacement) of the finished task.
void coreset_update(Coreset& coreset, const ReplayBuffer& buffer, Engine& rng,
                    double fraction = kCoresetFraction);

/// A current-task batch of size B and, when `past` is non-empty, a batch of
/// size B drawn uniformly with replacement from it.
std::pair<Batch, Batch> mixed_batch(const ReplayBuffer& buffer, const std::vector<Transition>& past,
                                    Index batch_size, Engine& rng);

}  // namespace hcrl
