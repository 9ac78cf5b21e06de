#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hcrl/dynamics.hpp"
#include "hcrl/envs.hpp"
#include "hcrl/learner.hpp"
#include "hcrl/planner.hpp"

namespace hcrl {

struct Schedule {
  int P = 10;   // random-policy seed episodes per task
  int M = 100;  // MPC episodes per task
  int K = 30;   // steps per episode
  int S = 500;  // gradient steps after each MPC episode
  int B = 100;  // batch size
  double alpha_theta = 1e-4;
  double alpha_e = 1e-4;
  int eval_episodes = 10;

  void validate() const;
};

enum class Profile { Desk, Paper };

Profile parse_profile(std::string_view name);
std::string_view to_string(Profile p);

struct RunConfig {
  EnvName env = EnvName::Slide;
  Profile profile = Profile::Paper;
  Method method = Method::HyperCRL;
  std::vector<Method> methods{Method::HyperCRL, Method::Finetune};
  std::vector<std::uint64_t> seeds{0};
  int tasks = 5;
  Schedule schedule;

  int horizon = 20;
  int population = 500;
  int cem_iterations = 5;
  double elite_frac = 0.1;

  double beta_reg = 0.5;
  std::vector<Index> target_hidden{200, 200};
  std::vector<Index> hnet_hidden{50, 50};
  Activation hnet_activation = Activation::ReLU;
  DynLoss loss = DynLoss::MeanNorm;
  double ewc_lambda = 100.0;
  double si_c = 0.1;
  double si_xi = 0.1;

  std::string output_dir = "runs";
  int jobs = 1;

  void validate() const;
};

/// Built-in defaults for an environment under a profile. The paper profile
/// follows the published per-environment hyper-parameters; the desk profile
/// shrinks the schedule and the planner so a full comparison runs in minutes.
RunConfig default_config(EnvName env, Profile profile);

/// Every accepted configuration key, in echo order.
const std::vector<std::string>& config_keys();

/// Applies one textual setting. Unknown keys, malformed values and invalid
/// enums raise UsageError naming the key.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

using Settings = std::vector<std::pair<std::string, std::string>>;

/// Flat key: value pairs from a YAML mapping; sequences become comma lists.
Settings read_config_file(const std::filesystem::path& path);
Settings parse_config_text(const std::string& text);

/// Layered resolution: defaults(env, profile) <- file <- flags. `env` and
/// `profile` are picked first with the same precedence.
RunConfig resolve_config(const Settings& file, const Settings& flags);

/// Fully resolved config as key: value text, one key per line.
std::string to_yaml(const RunConfig& config);

std::vector<std::uint64_t> parse_seeds(const std::string& text);

LearnerOptions learner_options(const RunConfig& config, Method method);
CEMConfig cem_config(const RunConfig& config, const Env& env);

}  // namespace hcrl
