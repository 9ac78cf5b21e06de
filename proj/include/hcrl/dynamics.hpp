#pragma once

#include <cstddef>
#include <deque>
#include <vector>

#include <Eigen/Dense>

#include "hcrl/nn.hpp"
#include "hcrl/rng.hpp"

namespace hcrl {

struct Transition {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  Eigen::VectorXd s_next;
  int task_id = 0;
};

/// Column-stacked transitions, the unit every loss consumes.
struct Batch {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
  Eigen::MatrixXd next_states;
  std::vector<int> task_ids;

  Index size() const { return states.cols(); }
  bool empty() const { return states.cols() == 0; }
};

Batch make_batch(const std::vector<Transition>& items);
Batch make_batch(const std::vector<const Transition*>& items);
/// Columns of `b` whose task id equals `task_id`.
Batch select_task(const Batch& b, int task_id);

/// Holds the transitions of the task currently being learned. reset() is the
/// task boundary: everything from the previous task is dropped.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 100000) : capacity_(capacity) {}

  void reset(int task_id);
  /// Throws DataError when the transition belongs to another task.
  void add(Transition t);

  int task_id() const { return task_id_; }
  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  std::size_t capacity() const { return capacity_; }
  const Transition& operator[](std::size_t i) const { return items_[i]; }
  std::vector<Transition> contents() const { return {items_.begin(), items_.end()}; }

 private:
  std::size_t capacity_;
  int task_id_ = 0;
  std::deque<Transition> items_;
};

/// Uniform sampling with replacement.
Batch buffer_sample(const ReplayBuffer& buffer, Index batch_size, Engine& rng);
Batch sample_with_replacement(const std::vector<Transition>& items, Index batch_size, Engine& rng);

inline constexpr double kNormalizerStdFloor = 1e-2;
inline constexpr double kDeltaScaleFloor = 1e-3;

/// Per-dimension standardization of the concatenated (s, a) network input,
/// plus the per-dimension scale of the predicted state change.
struct Normalizer {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  Eigen::VectorXd delta_scale;  // empty means unit scale
  std::size_t count = 0;

  Normalizer() = default;
  /// Identity transform for an input of `dim` entries.
  explicit Normalizer(Index dim)
      : mean(Eigen::VectorXd::Zero(dim)), std(Eigen::VectorXd::Ones(dim)) {}

  Eigen::VectorXd apply(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
  Eigen::MatrixXd apply_batch(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const;

  bool operator==(const Normalizer&) const = default;
};

Normalizer normalizer_fit(const ReplayBuffer& buffer);
Normalizer normalizer_fit(const std::vector<Transition>& items);
inline Eigen::VectorXd normalizer_apply(const Normalizer& n, const Eigen::VectorXd& s,
                                        const Eigen::VectorXd& a) {
  return n.apply(s, a);
}

/// Delta-predicting target network:
/// s_next = s + delta_scale * f_theta(normalize(s, a)).
MLPSpec target_spec(Index state_dim, Index action_dim, std::vector<Index> hidden);

struct DynamicsModel {
  MLPSpec spec;
  Params theta;
  Normalizer norm;

  Eigen::VectorXd predict_next(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const;
  Eigen::MatrixXd predict_batch(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const;
};

inline Eigen::VectorXd predict_next(const Params& theta, const MLPSpec& spec, const Normalizer& norm,
                                    const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
  return DynamicsModel{spec, theta, norm}.predict_next(s, a);
}

enum class DynLoss {
  MeanNorm,         // mean over the batch of ||s_hat - s'||_2
  MeanSquaredNorm,  // mean over the batch of ||s_hat - s'||_2^2
};

double dyn_loss(const DynamicsModel& model, const Batch& batch, DynLoss kind = DynLoss::MeanNorm);

struct DynLossGrad {
  double loss = 0.0;
  Eigen::VectorXd grad_theta;
};

/// `weight` scales both the loss and its gradient.
DynLossGrad dyn_loss_and_grad(const DynamicsModel& model, const Batch& batch,
                              DynLoss kind = DynLoss::MeanNorm, double weight = 1.0);

}  // namespace hcrl
