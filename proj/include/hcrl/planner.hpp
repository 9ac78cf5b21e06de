#pragma once

#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "hcrl/dynamics.hpp"
#include "hcrl/envs.hpp"
#include "hcrl/rng.hpp"

namespace hcrl {

/// Batched one-step transition model: column c of the result is the
/// successor of (states.col(c), actions.col(c)).
class TransitionModel {
 public:
  virtual ~TransitionModel() = default;
  virtual Eigen::MatrixXd predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const = 0;
};

class LearnedModel final : public TransitionModel {
 public:
  explicit LearnedModel(DynamicsModel model) : model_(std::move(model)) {}
  Eigen::MatrixXd predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const override {
    return model_.predict_batch(states, actions);
  }
  const DynamicsModel& model() const { return model_; }

 private:
  DynamicsModel model_;
};

/// Ground-truth dynamics, used as a planning oracle.
class EnvModel final : public TransitionModel {
 public:
  explicit EnvModel(const Env& env) : env_(&env) {}
  Eigen::MatrixXd predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const override;

 private:
  const Env* env_;
};

using RewardFn = std::function<double(const Eigen::VectorXd& s_next, const Eigen::VectorXd& a)>;

inline RewardFn env_reward(const Env& env) {
  return [&env](const Eigen::VectorXd& s, const Eigen::VectorXd& a) { return env.reward(s, a); };
}

struct CEMConfig {
  int horizon = 20;
  int iterations = 5;
  int population = 500;
  double elite_frac = 0.1;
  double min_std = 1e-3;
  Eigen::VectorXd init_std;
  Eigen::VectorXd action_low;
  Eigen::VectorXd action_high;

  /// init_std is half of the half-range of each action dimension.
  static CEMConfig for_env(const Env& env, int horizon, int population, int iterations = 5,
                           double elite_frac = 0.1);
  Index action_dim() const { return action_low.size(); }
  int elite_count() const;
  void validate() const;
};

/// Time-indexed diagonal Gaussian over action sequences, horizon x |a|.
struct Plan {
  Eigen::MatrixXd mu;
  Eigen::MatrixXd sigma;
};

Plan initial_plan(const CEMConfig& config);
/// Drops the executed step and pads the tail with (0, init_std). Every
/// step's sigma is reset to init_std so each replan can still explore.
Plan shift_plan(const Plan& plan, const CEMConfig& config);

/// Sum of r(s_{k+1}, a_k) along the model rollout; -inf once any predicted
/// state is non-finite. `actions` is horizon x |a|.
double rollout_return(const TransitionModel& model, const RewardFn& reward, const Eigen::VectorXd& s0,
                      const Eigen::MatrixXd& actions);

/// Returns of many sequences at once; column c of `sequences` is one
/// sequence flattened step-major (horizon * |a| rows).
Eigen::VectorXd rollout_returns(const TransitionModel& model, const RewardFn& reward,
                                const Eigen::VectorXd& s0, const Eigen::MatrixXd& sequences,
                                Index action_dim);

struct CEMResult {
  Eigen::MatrixXd actions;  // horizon x |a|, the final elite mean
  Plan plan;
  std::vector<double> elite_mean_returns;  // one entry per iteration
};

/// Throws PlannerFailure when every candidate of an iteration is invalid.
CEMResult cem_plan(const TransitionModel& model, const RewardFn& reward, const Eigen::VectorXd& s0,
                   const CEMConfig& config, const Plan* warm_start, Engine& rng);

struct TraceStep {
  Eigen::VectorXd s;
  Eigen::VectorXd a;
  double reward = 0.0;
  Eigen::VectorXd s_next;
};

struct EpisodeTrace {
  std::vector<TraceStep> steps;
  bool failed = false;  // planner failure cut the episode short

  double total_reward() const;
};

/// Receding-horizon control: plan, execute the first action, replan. When
/// `buffer` is set every executed transition is recorded under `task_id`.
EpisodeTrace mpc_episode(const Env& env, const TransitionModel& model, const RewardFn& reward, int K,
                         const CEMConfig& config, Engine& rng, ReplayBuffer* buffer = nullptr,
                         int task_id = 0);

/// Uniform random actions within the bounds.
EpisodeTrace random_episode(const Env& env, int K, Engine& rng, ReplayBuffer* buffer = nullptr,
                            int task_id = 0);

}  // namespace hcrl
