#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hcrl/metrics.hpp"
#include "hcrl/runner.hpp"

namespace hcrl {

/// Six significant digits, printf "%.6g".
std::string format_g6(double v);

void write_text(const std::filesystem::path& path, const std::string& text);

/// episode,task,reward
std::string trace_csv(const RunRecord& record);
/// env,method,seed,task_eval,task_trained,reward for every populated cell.
std::string eval_csv(const std::vector<RunRecord>& records);
/// method,metric,task,mean,std
std::string summary_csv(const MetricsTable& table);

struct RStarRow {
  std::string env;
  int task = 0;
  std::uint64_t seed = 0;
  double r_star = 0.0;
};
/// env,task,seed,r_star
std::string rstar_csv(const std::vector<RStarRow>& rows);

struct EvalTable {
  std::string env;
  std::vector<MethodRuns> runs;  // methods in first-seen order, seeds in file order
};

/// Reads one or more eval CSVs (all from the same environment).
EvalTable read_eval_csv(const std::vector<std::filesystem::path>& paths);
/// Mean r* per task across seeds; NaN for tasks with no row.
std::vector<double> read_rstar_csv(const std::filesystem::path& path, int tasks);

}  // namespace hcrl
