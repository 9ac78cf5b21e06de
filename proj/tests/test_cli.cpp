#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "hcrl/cli.hpp"

using namespace hcrl;
namespace fs = std::filesystem;

namespace {

const fs::path kData = HCRL_TEST_DATA;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = cli_main(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> tiny(const fs::path& out) {
  return {"--profile", "desk", "--out", out.string(), "--set", "tasks=2", "--set", "P=1", "--set", "M=1",
          "--set", "K=4", "--set", "S=2", "--set", "B=8", "--set", "eval_episodes=1", "--set", "horizon=3",
          "--set", "population=20", "--set", "cem_iterations=2", "--set", "target_hidden=8",
          "--set", "hnet_hidden=8"};
}

std::vector<std::string> cat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("report on the golden fixtures") {
  const auto r = run({"report", (kData / "eval_fixture.csv").string(), "--rstar", (kData / "rstar_fixture.csv").string()});
  CHECK(r.code == kExitOk);
  CHECK(r.out == slurp(kData / "report_expected.txt"));
}

TEST_CASE("usage errors") {
  const auto pnn = run({"train", "--method", "pnn"});
  CHECK(pnn.code == kExitUsage);
  CHECK(pnn.err.find("hypercrl") != std::string::npos);
  CHECK(pnn.err.find("finetune") != std::string::npos);

  CHECK(run({}).code == kExitUsage);
  CHECK(run({"fly"}).code == kExitUsage);
  CHECK(run({"train", "--set", "nonsense=1"}).code == kExitUsage);
  CHECK(run({"train", "--resume", "x.ckpt", "--seed", "1"}).code == kExitUsage);
  CHECK(run({"report", (kData / "missing.csv").string()}).code == kExitFailure);
}

TEST_CASE("train, resume and eval") {
  const fs::path dir = fs::temp_directory_path() / "hcrl_cli_test";
  fs::remove_all(dir);
  const fs::path full_dir = dir / "full";
  const fs::path part_dir = dir / "part";

  const auto full = run(cat({"train", "--env", "slide", "--method", "hypercrl", "--seed", "0"}, tiny(full_dir)));
  REQUIRE(full.code == kExitOk);
  const fs::path run_dir = full_dir / "slide" / "hypercrl" / "seed_0";
  for (const char* f : {"config.yaml", "trace.csv", "eval.csv", "final.ckpt", "STATUS", "checkpoints/task_2.ckpt"}) {
    CHECK(fs::exists(run_dir / f));
  }
  CHECK(slurp(run_dir / "STATUS").find("complete") == 0);
  CHECK(slurp(run_dir / "trace.csv").rfind("episode,task,reward\n", 0) == 0);

  const std::string first_trace = slurp(run_dir / "trace.csv");
  const std::string first_eval = slurp(run_dir / "eval.csv");
  const std::string first_ckpt = slurp(run_dir / "final.ckpt");
  const auto again = run(cat({"train", "--env", "slide", "--method", "hypercrl", "--seed", "0"}, tiny(full_dir)));
  REQUIRE(again.code == kExitOk);
  CHECK(slurp(run_dir / "trace.csv") == first_trace);
  CHECK(slurp(run_dir / "eval.csv") == first_eval);
  CHECK(slurp(run_dir / "final.ckpt") == first_ckpt);

  const auto part = run(cat({"train", "--env", "slide", "--method", "hypercrl", "--seed", "0", "--stop-after", "1"},
                            tiny(part_dir)));
  REQUIRE(part.code == kExitOk);
  const fs::path part_run = part_dir / "slide" / "hypercrl" / "seed_0";
  CHECK(slurp(part_run / "STATUS").find("partial") == 0);

  const auto resumed = run({"train", "--resume", (part_run / "checkpoints" / "task_1.ckpt").string()});
  REQUIRE(resumed.code == kExitOk);
  CHECK(slurp(part_run / "trace.csv") == slurp(run_dir / "trace.csv"));
  CHECK(slurp(part_run / "eval.csv") == slurp(run_dir / "eval.csv"));
  CHECK(slurp(part_run / "STATUS").find("complete") == 0);

  const auto ev = run({"eval", "--checkpoint", (run_dir / "final.ckpt").string(), "--episodes", "1"});
  CHECK(ev.code == kExitOk);
  CHECK(ev.out.rfind("env,method,seed,task_eval,task_trained,reward\n", 0) == 0);

  const fs::path bad = dir / "bad.ckpt";
  {
    std::ofstream(bad) << "not a checkpoint";
  }
  CHECK(run({"eval", "--checkpoint", bad.string()}).code == kExitFailure);
  fs::remove_all(dir);
}

TEST_CASE("compare writes a retention table") {
  const fs::path dir = fs::temp_directory_path() / "hcrl_cli_compare";
  fs::remove_all(dir);
  const auto r = run(cat({"compare", "--env", "slide", "--methods", "hypercrl,finetune", "--seeds", "0..1", "--jobs", "2"},
                         tiny(dir)));
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("Retention (%) on slide") != std::string::npos);
  CHECK(fs::exists(dir / "slide" / "eval.csv"));
  CHECK(fs::exists(dir / "slide" / "summary.csv"));
  CHECK(slurp(dir / "slide" / "report.txt") == r.out);
  CHECK(fs::exists(dir / "slide" / "finetune" / "seed_1" / "trace.csv"));
  fs::remove_all(dir);
}
