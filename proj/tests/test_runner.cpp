#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "hcrl/config.hpp"
#include "hcrl/io.hpp"
#include "hcrl/runner.hpp"

using namespace hcrl;

namespace {

RunConfig tiny_config(int tasks = 2) {
  return resolve_config({}, {{"profile", "desk"},
                             {"tasks", std::to_string(tasks)},
                             {"P", "2"},
                             {"M", "2"},
                             {"K", "5"},
                             {"S", "3"},
                             {"B", "8"},
                             {"eval_episodes", "1"},
                             {"horizon", "3"},
                             {"population", "20"},
                             {"cem_iterations", "2"},
                             {"target_hidden", "8"},
                             {"hnet_hidden", "8"}});
}

class SpyLearner final : public Learner {
 public:
  SpyLearner(std::unique_ptr<Learner> inner, const ReplayBuffer& buffer) : inner_(std::move(inner)), buffer_(buffer) {}

  Method method() const override { return inner_->method(); }
  int tasks() const override { return inner_->tasks(); }
  void begin_task(int task_id) override { inner_->begin_task(task_id); }
  void fit_normalizer(const ReplayBuffer& buffer) override {
    if (first_fit < 0) first_fit = static_cast<int>(buffer.size());
    inner_->fit_normalizer(buffer);
  }
  void update(const Batch& current, const Batch& past) override {
    if (first_update < 0) first_update = static_cast<int>(buffer_.size());
    ++updates;
    inner_->update(current, past);
  }
  void end_task(const ReplayBuffer& buffer) override { inner_->end_task(buffer); }
  const std::vector<Transition>& past_store() const override { return inner_->past_store(); }
  DynamicsModel model_for(int task_id) const override { return inner_->model_for(task_id); }
  void save(Archive& out) const override { inner_->save(out); }
  void load(const Archive& in) override { inner_->load(in); }

  int first_fit = -1;
  int first_update = -1;
  int updates = 0;

 private:
  std::unique_ptr<Learner> inner_;
  const ReplayBuffer& buffer_;
};

struct TaskRun {
  RunRecord record;
  int first_fit = -1;
  int first_update = -1;
  int updates = 0;
  Params before;
  Params after;
};

TaskRun one_task(RunConfig c, Method m) {
  const auto seq = make_task_sequence(default_env_spec(c.env));
  const RngStreams streams(0);
  ReplayBuffer buffer(100000);
  SpyLearner spy(make_learner(learner_options(c, m), streams), buffer);
  buffer.reset(1);
  spy.begin_task(1);
  TaskRun out;
  out.record.eval = Eigen::MatrixXd::Zero(1, 1);
  out.before = spy.model_for(1).theta;
  run_task(spy, *seq[0].env, 1, c.schedule, cem_config(c, *seq[0].env), streams, 1, buffer, out.record);
  out.after = spy.model_for(1).theta;
  out.first_fit = spy.first_fit;
  out.first_update = spy.first_update;
  out.updates = spy.updates;
  return out;
}

}  // namespace

TEST_CASE("seed episodes come before any model use") {
  RunConfig c = tiny_config();
  c.schedule.P = 10;
  const TaskRun r = one_task(c, Method::HyperCRL);
  CHECK(r.first_fit == 10 * c.schedule.K);
  CHECK(r.first_update == 11 * c.schedule.K);
  CHECK(r.updates == c.schedule.M * c.schedule.S);
  CHECK(r.record.env_steps == static_cast<std::size_t>((c.schedule.P + c.schedule.M) * c.schedule.K));
  CHECK(r.record.trace.size() == static_cast<std::size_t>(c.schedule.M));
}

TEST_CASE("no gradient steps leave the model unchanged") {
  RunConfig c = tiny_config();
  c.schedule.S = 0;
  for (Method m : {Method::HyperCRL, Method::Finetune, Method::EWC}) {
    const TaskRun r = one_task(c, m);
    CHECK(r.updates == 0);
    CHECK(r.before == r.after);
  }
  c.schedule.S = 2;
  const TaskRun trained = one_task(c, Method::HyperCRL);
  CHECK(!(trained.before == trained.after));
}

TEST_CASE("a sequence run") {
  const RunConfig c = tiny_config(3);
  DataAudit audit;
  RunHooks hooks;
  hooks.audit = &audit;
  const RunRecord r = run_sequence(c, Method::HyperCRL, 4, hooks);
  CHECK(r.tasks_completed == 3);
  CHECK(r.env_steps == static_cast<std::size_t>((c.schedule.P + c.schedule.M) * c.schedule.K * 3));
  for (int i = 1; i <= 3; ++i) {
    for (int j = 1; j <= 3; ++j) CHECK(std::isfinite(r.r(i, j)) == (i <= j));
  }
  CHECK(audit.violations == 0);
  CHECK(audit.transitions > 0);

  const RunRecord again = run_sequence(c, Method::HyperCRL, 4);
  CHECK(trace_csv(again) == trace_csv(r));
  CHECK(eval_csv({again}) == eval_csv({r}));
}

TEST_CASE("zero-strength EWC and SI reproduce finetuning bit for bit") {
  RunConfig c = tiny_config(3);
  c.ewc_lambda = 0.0;
  c.si_c = 0.0;
  const RunRecord ft = run_sequence(c, Method::Finetune, 1);
  const RunRecord ewc = run_sequence(c, Method::EWC, 1);
  const RunRecord si = run_sequence(c, Method::SI, 1);
  for (const RunRecord* other : {&ewc, &si}) {
    REQUIRE(other->trace.size() == ft.trace.size());
    for (std::size_t k = 0; k < ft.trace.size(); ++k) CHECK(other->trace[k].reward == ft.trace[k].reward);
    CHECK(other->eval.cwiseEqual(ft.eval).count() + other->eval.array().isNaN().count() == ft.eval.size());
  }
}

TEST_CASE("replay methods only see earlier tasks through their store") {
  const RunConfig c = tiny_config(3);
  for (Method m : {Method::Coreset, Method::Multitask, Method::HyperCRLMT, Method::SI, Method::EWC}) {
    DataAudit audit;
    RunHooks hooks;
    hooks.audit = &audit;
    const RunRecord r = run_sequence(c, m, 2, hooks);
    CHECK(audit.violations == 0);
    CHECK(r.tasks_completed == 3);
  }
}

TEST_CASE("resume from a task checkpoint matches the uninterrupted run") {
  const RunConfig c = tiny_config(3);
  const auto dir = std::filesystem::temp_directory_path() / "hcrl_resume_test";
  std::filesystem::remove_all(dir);
  for (Method m : {Method::HyperCRL, Method::SI, Method::Coreset}) {
    const RunRecord full = run_sequence(c, m, 5);
    RunHooks stop;
    stop.checkpoint_dir = dir;
    stop.stop_after_task = 1;
    const RunRecord partial = run_sequence(c, m, 5, stop);
    CHECK(partial.tasks_completed == 1);
    const Archive ckpt = load_checkpoint(dir / "task_1.ckpt");
    CHECK(checkpoint_record(ckpt).trace.size() == partial.trace.size());
    const RunRecord resumed = resume_sequence(ckpt);
    CHECK(trace_csv(resumed) == trace_csv(full));
    CHECK(eval_csv({resumed}) == eval_csv({full}));
    CHECK(resumed.env_steps == full.env_steps);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("single-task baseline is reproducible") {
  const RunConfig c = tiny_config(2);
  const double a = run_single_task_baseline(c, 2, 3);
  CHECK(std::isfinite(a));
  CHECK(run_single_task_baseline(c, 2, 3) == a);
}
