#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "hcrl/config.hpp"
#include "hcrl/runner.hpp"

namespace hcrl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// <output_dir>/<env>/<method>/seed_<seed>
std::filesystem::path run_directory(const RunConfig& config, Method method, std::uint64_t seed);

/// Runs (or resumes) one method on one seed and fills its run directory:
/// config.yaml, trace.csv, eval.csv, checkpoints/task_<t>.ckpt, final.ckpt
/// and a STATUS file ("complete", "partial ..." or "failed: ...").
RunRecord train_run(const RunConfig& config, Method method, std::uint64_t seed, const RunHooks& hooks = {});
RunRecord resume_run(const std::filesystem::path& checkpoint, const RunHooks& hooks = {});

/// Entry point of the command-line tool. Returns the process exit code.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hcrl
