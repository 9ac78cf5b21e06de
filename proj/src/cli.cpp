#include "hcrl/cli.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "hcrl/checkpoint.hpp"
#include "hcrl/errors.hpp"
#include "hcrl/io.hpp"
#include "hcrl/metrics.hpp"

namespace hcrl {

std::filesystem::path run_directory(const RunConfig& config, Method method, std::uint64_t seed) {
  return std::filesystem::path(config.output_dir) / std::string(to_string(config.env)) /
         std::string(to_string(method)) / ("seed_" + std::to_string(seed));
}

namespace {

void write_status(const std::filesystem::path& dir, const std::string& status) {
  write_text(dir / "STATUS", status + "\n");
}

void finish_run(const std::filesystem::path& dir, const RunRecord& record) {
  write_text(dir / "trace.csv", trace_csv(record));
  write_text(dir / "eval.csv", eval_csv({record}));
  if (record.tasks_completed > 0) {
    const auto last = dir / "checkpoints" / ("task_" + std::to_string(record.tasks_completed) + ".ckpt");
    std::filesystem::copy_file(last, dir / "final.ckpt", std::filesystem::copy_options::overwrite_existing);
  }
  if (record.tasks_completed == record.tasks) {
    write_status(dir, "complete");
  } else {
    write_status(dir, "partial: " + std::to_string(record.tasks_completed) + " of " + std::to_string(record.tasks) +
                          " tasks");
  }
}

template <typename Fn>
RunRecord guarded_run(const std::filesystem::path& dir, Fn&& fn) {
  write_status(dir, "running");
  try {
    RunRecord record = fn();
    finish_run(dir, record);
    return record;
  } catch (const std::exception& e) {
    write_status(dir, std::string("failed: ") + e.what());
    throw;
  }
}

}  // namespace

RunRecord train_run(const RunConfig& config, Method method, std::uint64_t seed, const RunHooks& hooks) {
  RunConfig echo = config;
  echo.method = method;
  echo.seeds = {seed};
  const auto dir = run_directory(config, method, seed);
  std::filesystem::create_directories(dir);
  write_text(dir / "config.yaml", to_yaml(echo));

  RunHooks h = hooks;
  h.checkpoint_dir = dir / "checkpoints";
  return guarded_run(dir, [&] { return run_sequence(echo, method, seed, h); });
}

RunRecord resume_run(const std::filesystem::path& checkpoint, const RunHooks& hooks) {
  const Archive archive = load_checkpoint(checkpoint);
  const RunConfig config = checkpoint_config(archive);
  const Method method = parse_method(archive.get_str("method"));
  const auto seed = static_cast<std::uint64_t>(archive.get_i64("rng.seed"));
  const auto dir = run_directory(config, method, seed);
  std::filesystem::create_directories(dir);
  write_text(dir / "config.yaml", archive.get_str("config"));

  RunHooks h = hooks;
  h.checkpoint_dir = dir / "checkpoints";
  return guarded_run(dir, [&] { return resume_sequence(archive, h); });
}

namespace {

struct CommonOptions {
  std::string config_file;
  std::string env;
  std::string profile;
  std::string out;
  std::vector<std::string> sets;
  int jobs = 0;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_file, "YAML config file");
  cmd->add_option("--env", o.env, "slide | push | latch");
  cmd->add_option("--profile", o.profile, "paper | desk");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--set", o.sets, "extra setting key=value (repeatable)");
}

RunConfig build_config(const CommonOptions& o, Settings flags) {
  Settings file;
  if (!o.config_file.empty()) file = read_config_file(o.config_file);
  Settings all;
  if (!o.env.empty()) all.emplace_back("env", o.env);
  if (!o.profile.empty()) all.emplace_back("profile", o.profile);
  if (!o.out.empty()) all.emplace_back("output_dir", o.out);
  if (o.jobs > 0) all.emplace_back("jobs", std::to_string(o.jobs));
  for (auto& kv : flags) all.push_back(std::move(kv));
  for (const auto& s : o.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + s + "'");
    all.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  return resolve_config(file, all);
}

class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err) {}
  void operator()(const std::string& msg) {
    std::lock_guard lock(mu_);
    err_ << "[hcrl] " << msg << "\n";
    err_.flush();
  }

 private:
  std::ostream& err_;
  std::mutex mu_;
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads; the first exception
/// is rethrown after every worker stops.
template <typename Fn>
void parallel_for(std::size_t n, int jobs, Fn&& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::filesystem::path env_directory(const RunConfig& config) {
  return std::filesystem::path(config.output_dir) / std::string(to_string(config.env));
}

int cmd_train(const CommonOptions& o, const std::string& method, const std::string& seed, const std::string& resume,
              int stop_after, std::ostream& out, std::ostream& err) {
  Logger log(err);
  RunHooks hooks;
  hooks.log = [&](const std::string& m) { log(m); };
  hooks.stop_after_task = stop_after;

  RunRecord record;
  if (!resume.empty()) {
    record = resume_run(resume, hooks);
  } else {
    Settings flags;
    if (!method.empty()) flags.emplace_back("method", method);
    if (!seed.empty()) flags.emplace_back("seeds", seed);
    const RunConfig config = build_config(o, flags);
    if (config.seeds.size() != 1) throw UsageError("train runs exactly one seed");
    record = train_run(config, config.method, config.seeds.front(), hooks);
  }
  out << eval_csv({record});
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint, int episodes, std::ostream& out) {
  const Archive archive = load_checkpoint(checkpoint);
  RunConfig config = checkpoint_config(archive);
  if (episodes > 0) config.schedule.eval_episodes = episodes;
  const auto learner = checkpoint_learner(archive);
  RunRecord record = checkpoint_record(archive);
  const int t = record.tasks_completed;
  if (t < 1) throw DataError("checkpoint holds no finished task");
  const auto sequence = make_task_sequence(default_env_spec(config.env));
  const RngStreams streams(record.seed);
  for (int i = 1; i <= t; ++i) {
    const Env& env = *sequence[static_cast<std::size_t>(i - 1)].env;
    record.eval(i - 1, t - 1) = evaluate(*learner, env, i, config.schedule, cem_config(config, env), streams,
                                         static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(t));
  }
  Eigen::MatrixXd only = Eigen::MatrixXd::Constant(record.eval.rows(), record.eval.cols(),
                                                   std::numeric_limits<double>::quiet_NaN());
  only.col(t - 1) = record.eval.col(t - 1);
  record.eval = only;
  out << eval_csv({record});
  return kExitOk;
}

std::vector<MethodRuns> group_by_method(const std::vector<RunRecord>& records) {
  std::vector<MethodRuns> runs;
  for (const auto& r : records) {
    const std::string name(to_string(r.method));
    auto it = std::find_if(runs.begin(), runs.end(), [&](const MethodRuns& m) { return m.method == name; });
    if (it == runs.end()) {
      runs.push_back(MethodRuns{name, {}});
      it = std::prev(runs.end());
    }
    it->evals.push_back(r.eval);
  }
  return runs;
}

void write_report(const std::filesystem::path& dir, const MetricsTable& table, std::ostream& out) {
  const std::string report = format_report(table);
  write_text(dir / "summary.csv", summary_csv(table));
  write_text(dir / "report.txt", report);
  out << report;
}

int cmd_compare(const CommonOptions& o, const std::string& methods, const std::string& seeds,
                const std::string& rstar, std::ostream& out, std::ostream& err) {
  Settings flags;
  if (!methods.empty()) flags.emplace_back("methods", methods);
  if (!seeds.empty()) flags.emplace_back("seeds", seeds);
  const RunConfig config = build_config(o, flags);

  std::vector<std::pair<Method, std::uint64_t>> jobs;
  for (Method m : config.methods) {
    for (auto s : config.seeds) jobs.emplace_back(m, s);
  }
  Logger log(err);
  RunHooks hooks;
  hooks.log = [&](const std::string& m) { log(m); };
  std::vector<RunRecord> records(jobs.size());
  parallel_for(jobs.size(), config.jobs, [&](std::size_t i) {
    records[i] = train_run(config, jobs[i].first, jobs[i].second, hooks);
  });

  const auto dir = env_directory(config);
  write_text(dir / "eval.csv", eval_csv(records));
  std::optional<std::vector<double>> r_star;
  if (!rstar.empty()) r_star = read_rstar_csv(rstar, config.tasks);
  write_report(dir, aggregate(std::string(to_string(config.env)), group_by_method(records), r_star), out);
  return kExitOk;
}

int cmd_baseline(const CommonOptions& o, const std::string& seeds, std::ostream& out, std::ostream& err) {
  Settings flags;
  if (!seeds.empty()) flags.emplace_back("seeds", seeds);
  const RunConfig config = build_config(o, flags);

  std::vector<std::pair<int, std::uint64_t>> jobs;
  for (auto s : config.seeds) {
    for (int t = 1; t <= config.tasks; ++t) jobs.emplace_back(t, s);
  }
  Logger log(err);
  std::vector<RStarRow> rows(jobs.size());
  parallel_for(jobs.size(), config.jobs, [&](std::size_t i) {
    const auto [task, seed] = jobs[i];
    rows[i] = RStarRow{std::string(to_string(config.env)), task, seed, run_single_task_baseline(config, task, seed)};
    log("single seed " + std::to_string(seed) + ": task " + std::to_string(task) + " r* = " +
        format_g6(rows[i].r_star));
  });
  const std::string csv = rstar_csv(rows);
  write_text(env_directory(config) / "rstar.csv", csv);
  out << csv;
  return kExitOk;
}

int cmd_report(const std::vector<std::string>& evals, const std::string& rstar, const std::string& out_dir,
               std::ostream& out) {
  std::vector<std::filesystem::path> paths(evals.begin(), evals.end());
  const EvalTable table = read_eval_csv(paths);
  int tasks = 0;
  for (const auto& m : table.runs) {
    for (const auto& e : m.evals) tasks = std::max(tasks, static_cast<int>(e.rows()));
  }
  std::optional<std::vector<double>> r_star;
  if (!rstar.empty()) r_star = read_rstar_csv(rstar, tasks);
  const MetricsTable metrics = aggregate(table.env, table.runs, r_star);
  if (out_dir.empty()) {
    out << format_report(metrics);
  } else {
    write_report(out_dir, metrics, out);
  }
  return kExitOk;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Continual model-based reinforcement learning with task-conditioned hypernetworks", "hcrl"};
  app.require_subcommand(1);

  CommonOptions train_o, compare_o, baseline_o;
  std::string method, seed, resume;
  int stop_after = 0;
  auto* train = app.add_subcommand("train", "train one method on one seed");
  add_common(train, train_o);
  train->add_option("--method", method, "hypercrl | hypercrl-mt | finetune | ewc | si | coreset | multitask | single");
  train->add_option("--seed", seed, "random seed");
  train->add_option("--resume", resume, "continue from a task checkpoint");
  train->add_option("--stop-after", stop_after, "stop after this many tasks");

  std::string checkpoint;
  int episodes = 0;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on every task it has seen");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--episodes", episodes, "evaluation episodes per task");

  std::string methods, seeds, rstar;
  auto* compare = app.add_subcommand("compare", "run several methods across seeds and tabulate retention");
  add_common(compare, compare_o);
  compare->add_option("--methods", methods, "comma-separated method list");
  compare->add_option("--seeds", seeds, "seed list, e.g. 0..3 or 0,2,5");
  compare->add_option("--rstar", rstar, "single-task baseline CSV for forward transfer");
  compare->add_option("--jobs", compare_o.jobs, "parallel runs");

  std::string baseline_seeds;
  auto* baseline = app.add_subcommand("baseline", "single-task from-scratch runs (r*)");
  add_common(baseline, baseline_o);
  baseline->add_option("--seeds", baseline_seeds, "seed list");
  baseline->add_option("--jobs", baseline_o.jobs, "parallel runs");

  std::vector<std::string> report_evals;
  std::string report_rstar, report_out;
  auto* report = app.add_subcommand("report", "aggregate eval CSVs into retention and transfer tables");
  report->add_option("--eval,evals", report_evals, "eval CSV files")->required();
  report->add_option("--rstar", report_rstar, "single-task baseline CSV");
  report->add_option("--out", report_out, "directory for summary.csv and report.txt");

  std::vector<std::string> argv_storage{"hcrl"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*train) {
      if (!resume.empty() && (!method.empty() || !seed.empty() || !train_o.config_file.empty())) {
        throw UsageError("--resume takes its settings from the checkpoint");
      }
      return cmd_train(train_o, method, seed, resume, stop_after, out, err);
    }
    if (*eval) return cmd_eval(checkpoint, episodes, out);
    if (*compare) return cmd_compare(compare_o, methods, seeds, rstar, out, err);
    if (*baseline) return cmd_baseline(baseline_o, baseline_seeds, out, err);
    if (*report) return cmd_report(report_evals, report_rstar, report_out, out);
  } catch (const UsageError& e) {
    err << "hcrl: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "hcrl: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace hcrl
