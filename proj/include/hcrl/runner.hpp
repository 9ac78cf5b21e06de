#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "hcrl/checkpoint.hpp"
#include "hcrl/config.hpp"
#include "hcrl/envs.hpp"
#include "hcrl/learner.hpp"
#include "hcrl/planner.hpp"
#include "hcrl/rng.hpp"

namespace hcrl {

struct EpisodeRecord {
  int episode = 0;  // 1-based across the whole run
  int task = 0;
  double reward = 0.0;
  bool failed = false;
};

struct RunRecord {
  Method method = Method::HyperCRL;
  EnvName env = EnvName::Slide;
  std::uint64_t seed = 0;
  int tasks = 0;
  int tasks_completed = 0;
  std::vector<EpisodeRecord> trace;
  /// eval(i-1, j-1) = mean reward on task i after training task j; NaN for i > j.
  Eigen::MatrixXd eval;
  std::size_t env_steps = 0;

  double r(int i, int j) const { return eval(i - 1, j - 1); }
};

/// Counts every transition handed to a learner that belongs to a task the
/// method is not allowed to see.
struct DataAudit {
  std::size_t batches = 0;
  std::size_t transitions = 0;
  std::size_t violations = 0;

  void check_buffer(const ReplayBuffer& buffer, int task);
  void check_batches(const Batch& current, const Batch& past, int task, bool replay_allowed);
  void check_store(const std::vector<Transition>& store, int task, bool replay_allowed);
};

struct RunHooks {
  /// When set, a checkpoint is written here after every finished task.
  std::optional<std::filesystem::path> checkpoint_dir;
  /// Stop once this many tasks are complete (0 = run them all).
  int stop_after_task = 0;
  DataAudit* audit = nullptr;
  std::function<void(const std::string&)> log;
};

/// P random-policy episodes, then M MPC episodes each followed by S
/// gradient steps. Appends to `record.trace` and returns the MPC episode
/// rewards. `stream_key` selects the random streams for this task.
std::vector<double> run_task(Learner& learner, const Env& env, int task_id, const Schedule& schedule,
                             const CEMConfig& cem, const RngStreams& streams, std::uint64_t stream_key,
                             ReplayBuffer& buffer, RunRecord& record, DataAudit* audit = nullptr);

/// Mean reward of `episodes` CEM/MPC episodes on `env` with the frozen model
/// of `model_task`. Draws only from the "eval" stream; mutates nothing.
double evaluate(const Learner& learner, const Env& env, int model_task, const Schedule& schedule,
                const CEMConfig& cem, const RngStreams& streams, std::uint64_t k0, std::uint64_t k1);

RunRecord run_sequence(const RunConfig& config, Method method, std::uint64_t seed, const RunHooks& hooks = {});
/// Continues a run from a task-boundary checkpoint.
RunRecord resume_sequence(const Archive& checkpoint, const RunHooks& hooks = {});

/// Fresh target-architecture model trained on task `task_id` alone; the
/// mean evaluation reward r*.
double run_single_task_baseline(const RunConfig& config, int task_id, std::uint64_t seed);

Archive make_checkpoint(const RunConfig& config, const Learner& learner, const RunRecord& record);
/// Config stored in a checkpoint.
RunConfig checkpoint_config(const Archive& checkpoint);
/// Rebuilds the learner saved in a checkpoint.
std::unique_ptr<Learner> checkpoint_learner(const Archive& checkpoint);
RunRecord checkpoint_record(const Archive& checkpoint);

}  // namespace hcrl
