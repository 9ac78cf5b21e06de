#include "hcrl/runner.hpp"

#include <cmath>
#include <limits>

#include "hcrl/errors.hpp"

namespace hcrl {

void DataAudit::check_buffer(const ReplayBuffer& buffer, int task) {
  if (buffer.task_id() != task) ++violations;
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    ++transitions;
    if (buffer[i].task_id != task) ++violations;
  }
}

void DataAudit::check_batches(const Batch& current, const Batch& past, int task, bool replay_allowed) {
  ++batches;
  for (int id : current.task_ids) {
    ++transitions;
    if (id != task) ++violations;
  }
  for (int id : past.task_ids) {
    ++transitions;
    if (!replay_allowed || id < 1 || id >= task) ++violations;
  }
}

void DataAudit::check_store(const std::vector<Transition>& store, int task, bool replay_allowed) {
  for (const auto& t : store) {
    if (!replay_allowed || t.task_id >= task) ++violations;
  }
}

namespace {

const std::vector<Transition>& no_transitions() {
  static const std::vector<Transition> empty;
  return empty;
}

std::size_t buffer_capacity(const Schedule& s) {
  return static_cast<std::size_t>(s.P + s.M) * static_cast<std::size_t>(s.K);
}

void note(const RunHooks& hooks, const std::string& msg) {
  if (hooks.log) hooks.log(msg);
}

}  // namespace

std::vector<double> run_task(Learner& learner, const Env& env, int task_id, const Schedule& schedule,
                             const CEMConfig& cem, const RngStreams& streams, std::uint64_t stream_key,
                             ReplayBuffer& buffer, RunRecord& record, DataAudit* audit) {
  if (learner.tasks() != task_id || buffer.task_id() != task_id) {
    throw StateError("run_task: the task boundary for task " + std::to_string(task_id) + " was not signalled");
  }
  const bool replay = replays_past(learner.method());
  const std::vector<Transition>& past = replay ? learner.past_store() : no_transitions();
  if (audit) audit->check_store(learner.past_store(), task_id, replay);

  for (int p = 0; p < schedule.P; ++p) {
    Engine rng = streams.engine("seed_policy", stream_key, static_cast<std::uint64_t>(p));
    record.env_steps += random_episode(env, schedule.K, rng, &buffer, task_id).steps.size();
  }
  learner.fit_normalizer(buffer);

  const RewardFn reward = env_reward(env);
  std::vector<double> rewards;
  for (int m = 0; m < schedule.M; ++m) {
    Engine plan_rng = streams.engine("cem", stream_key, static_cast<std::uint64_t>(m));
    const LearnedModel model(learner.model_for(task_id));
    const EpisodeTrace trace = mpc_episode(env, model, reward, schedule.K, cem, plan_rng, &buffer, task_id);
    record.env_steps += trace.steps.size();
    const int episode = static_cast<int>(record.trace.size()) + 1;
    record.trace.push_back(EpisodeRecord{episode, task_id, trace.total_reward(), trace.failed});
    rewards.push_back(trace.total_reward());

    learner.fit_normalizer(buffer);
    if (audit) audit->check_buffer(buffer, task_id);
    Engine train_rng = streams.engine("train", stream_key, static_cast<std::uint64_t>(m));
    try {
      for (int s = 0; s < schedule.S; ++s) {
        auto [current, old] = mixed_batch(buffer, past, schedule.B, train_rng);
        if (audit) audit->check_batches(current, old, task_id, replay);
        learner.update(current, old);
      }
    } catch (const DivergenceError&) {
      // The session is abandoned; parameters keep their last finite values.
    }
  }
  return rewards;
}

double evaluate(const Learner& learner, const Env& env, int model_task, const Schedule& schedule,
                const CEMConfig& cem, const RngStreams& streams, std::uint64_t k0, std::uint64_t k1) {
  const LearnedModel model(learner.model_for(model_task));
  const RewardFn reward = env_reward(env);
  double total = 0.0;
  for (int e = 0; e < schedule.eval_episodes; ++e) {
    Engine rng = streams.engine("eval", k0, k1, static_cast<std::uint64_t>(e));
    total += mpc_episode(env, model, reward, schedule.K, cem, rng, nullptr, model_task).total_reward();
  }
  return total / schedule.eval_episodes;
}

Archive make_checkpoint(const RunConfig& config, const Learner& learner, const RunRecord& record) {
  Archive a;
  a.put("config", to_yaml(config));
  a.put("method", std::string(to_string(record.method)));
  a.put("env", std::string(to_string(record.env)));
  a.put("rng.seed", static_cast<std::int64_t>(record.seed));
  a.put("task_index", record.tasks_completed);
  a.put("record.tasks", record.tasks);
  a.put("record.env_steps", static_cast<std::int64_t>(record.env_steps));
  const auto n = static_cast<Index>(record.trace.size());
  Eigen::VectorXd task(n), reward(n), failed(n);
  for (Index i = 0; i < n; ++i) {
    const auto& e = record.trace[static_cast<std::size_t>(i)];
    task[i] = e.task;
    reward[i] = e.reward;
    failed[i] = e.failed ? 1.0 : 0.0;
  }
  a.put("record.trace.task", std::move(task));
  a.put("record.trace.reward", std::move(reward));
  a.put("record.trace.failed", std::move(failed));
  a.put_matrix("record.eval", record.eval);
  learner.save(a);
  return a;
}

RunConfig checkpoint_config(const Archive& checkpoint) {
  return resolve_config(parse_config_text(checkpoint.get_str("config")), {});
}

std::unique_ptr<Learner> checkpoint_learner(const Archive& checkpoint) {
  const RunConfig config = checkpoint_config(checkpoint);
  const Method method = parse_method(checkpoint.get_str("method"));
  auto learner = make_learner(learner_options(config, method),
                              RngStreams(static_cast<std::uint64_t>(checkpoint.get_i64("rng.seed"))));
  const auto tasks = checkpoint.get_i64("task_index");
  for (std::int64_t t = 1; t <= tasks; ++t) learner->begin_task(static_cast<int>(t));
  learner->load(checkpoint);
  return learner;
}

RunRecord checkpoint_record(const Archive& checkpoint) {
  RunRecord r;
  r.method = parse_method(checkpoint.get_str("method"));
  r.env = parse_env_name(checkpoint.get_str("env"));
  r.seed = static_cast<std::uint64_t>(checkpoint.get_i64("rng.seed"));
  r.tasks = static_cast<int>(checkpoint.get_i64("record.tasks"));
  r.tasks_completed = static_cast<int>(checkpoint.get_i64("task_index"));
  r.env_steps = static_cast<std::size_t>(checkpoint.get_i64("record.env_steps"));
  const Eigen::VectorXd& task = checkpoint.get_vec("record.trace.task");
  const Eigen::VectorXd& reward = checkpoint.get_vec("record.trace.reward");
  const Eigen::VectorXd& failed = checkpoint.get_vec("record.trace.failed");
  if (reward.size() != task.size() || failed.size() != task.size()) {
    throw IntegrityError("checkpoint: inconsistent episode trace");
  }
  for (Index i = 0; i < task.size(); ++i) {
    r.trace.push_back(EpisodeRecord{static_cast<int>(i + 1), static_cast<int>(task[i]), reward[i], failed[i] != 0.0});
  }
  r.eval = checkpoint.get_matrix("record.eval");
  return r;
}

namespace {

RunRecord continue_sequence(const RunConfig& config, Learner& learner, RunRecord record, const RunHooks& hooks) {
  config.validate();
  const EnvSpec spec = default_env_spec(config.env);
  const auto sequence = make_task_sequence(spec);
  const RngStreams streams(record.seed);
  ReplayBuffer buffer(buffer_capacity(config.schedule));

  for (int t = record.tasks_completed + 1; t <= config.tasks; ++t) {
    const Env& env = *sequence[static_cast<std::size_t>(t - 1)].env;
    const CEMConfig cem = cem_config(config, env);
    buffer.reset(t);
    learner.begin_task(t);
    run_task(learner, env, t, config.schedule, cem, streams, static_cast<std::uint64_t>(t), buffer, record,
             hooks.audit);
    learner.end_task(buffer);

    for (int i = 1; i <= t; ++i) {
      const Env& eval_env = *sequence[static_cast<std::size_t>(i - 1)].env;
      record.eval(i - 1, t - 1) = evaluate(learner, eval_env, i, config.schedule, cem_config(config, eval_env),
                                           streams, static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t));
    }
    record.tasks_completed = t;
    note(hooks, std::string(to_string(record.method)) + " seed " + std::to_string(record.seed) + ": task " +
                    std::to_string(t) + " done, r[t][t] = " + std::to_string(record.r(t, t)));

    if (hooks.checkpoint_dir) {
      std::filesystem::create_directories(*hooks.checkpoint_dir);
      save_checkpoint(make_checkpoint(config, learner, record),
                      *hooks.checkpoint_dir / ("task_" + std::to_string(t) + ".ckpt"));
    }
    if (hooks.stop_after_task > 0 && t >= hooks.stop_after_task) break;
  }
  return record;
}

}  // namespace

RunRecord run_sequence(const RunConfig& config, Method method, std::uint64_t seed, const RunHooks& hooks) {
  config.validate();
  auto learner = make_learner(learner_options(config, method), RngStreams(seed));
  RunRecord record;
  record.method = method;
  record.env = config.env;
  record.seed = seed;
  record.tasks = config.tasks;
  record.eval = Eigen::MatrixXd::Constant(config.tasks, config.tasks, std::numeric_limits<double>::quiet_NaN());
  return continue_sequence(config, *learner, std::move(record), hooks);
}

RunRecord resume_sequence(const Archive& checkpoint, const RunHooks& hooks) {
  const RunConfig config = checkpoint_config(checkpoint);
  auto learner = checkpoint_learner(checkpoint);
  return continue_sequence(config, *learner, checkpoint_record(checkpoint), hooks);
}

double run_single_task_baseline(const RunConfig& config, int task_id, std::uint64_t seed) {
  config.validate();
  const EnvSpec spec = default_env_spec(config.env);
  if (task_id < 1 || task_id > static_cast<int>(spec.tasks.size())) {
    throw ConfigError("baseline: no task " + std::to_string(task_id));
  }
  const auto env = make_env(spec.tasks[static_cast<std::size_t>(task_id - 1)]);
  const CEMConfig cem = cem_config(config, *env);
  const RngStreams streams(seed);
  auto learner = make_learner(learner_options(config, Method::Single), streams);
  ReplayBuffer buffer(buffer_capacity(config.schedule));
  RunRecord record;
  record.method = Method::Single;
  record.env = config.env;
  record.seed = seed;

  // The learner sees a one-task world; stream keys keep each task's draws apart.
  const auto key = static_cast<std::uint64_t>(1000 + task_id);
  buffer.reset(1);
  learner->begin_task(1);
  run_task(*learner, *env, 1, config.schedule, cem, streams, key, buffer, record);
  learner->end_task(buffer);
  return evaluate(*learner, *env, 1, config.schedule, cem, streams, key, key);
}

}  // namespace hcrl
