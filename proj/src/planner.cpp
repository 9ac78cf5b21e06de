#include "hcrl/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hcrl/errors.hpp"

namespace hcrl {

Eigen::MatrixXd EnvModel::predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const {
  Eigen::MatrixXd out(states.rows(), states.cols());
  for (Index c = 0; c < states.cols(); ++c) {
    out.col(c) = env_->step(states.col(c), actions.col(c)).state;
  }
  return out;
}

CEMConfig CEMConfig::for_env(const Env& env, int horizon, int population, int iterations,
                             double elite_frac) {
  CEMConfig c;
  c.horizon = horizon;
  c.population = population;
  c.iterations = iterations;
  c.elite_frac = elite_frac;
  c.action_low = env.action_low();
  c.action_high = env.action_high();
  c.init_std = 0.25 * (c.action_high - c.action_low);
  return c;
}

int CEMConfig::elite_count() const {
  return static_cast<int>(std::ceil(elite_frac * population - 1e-9));
}

void CEMConfig::validate() const {
  if (horizon < 1) throw ConfigError("cem: horizon must be >= 1");
  if (iterations < 1) throw ConfigError("cem: iterations must be >= 1");
  if (!(elite_frac > 0.0 && elite_frac <= 1.0)) throw ConfigError("cem: elite_frac must be in (0, 1]");
  if (elite_count() < 2) throw ConfigError("cem: fewer than two elites");
  if (action_low.size() == 0 || action_low.size() != action_high.size() ||
      init_std.size() != action_low.size()) {
    throw ConfigError("cem: action bounds / init_std dimension mismatch");
  }
  if ((init_std.array() <= 0.0).any()) throw ConfigError("cem: init_std must be positive");
}

Plan initial_plan(const CEMConfig& config) {
  Plan p;
  p.mu = Eigen::MatrixXd::Zero(config.horizon, config.action_dim());
  p.sigma = config.init_std.transpose().replicate(config.horizon, 1);
  return p;
}

Plan shift_plan(const Plan& plan, const CEMConfig& config) {
  Plan p = initial_plan(config);
  const Index h = plan.mu.rows();
  if (h > 1) p.mu.topRows(h - 1) = plan.mu.bottomRows(h - 1);
  return p;
}

Eigen::VectorXd rollout_returns(const TransitionModel& model, const RewardFn& reward,
                                const Eigen::VectorXd& s0, const Eigen::MatrixXd& sequences,
                                Index action_dim) {
  const Index n = sequences.cols();
  const Index horizon = sequences.rows() / action_dim;
  Eigen::MatrixXd states = s0.replicate(1, n);
  Eigen::VectorXd returns = Eigen::VectorXd::Zero(n);
  std::vector<bool> valid(static_cast<std::size_t>(n), true);
  for (Index k = 0; k < horizon; ++k) {
    const Eigen::MatrixXd actions = sequences.middleRows(k * action_dim, action_dim);
    states = model.predict(states, actions);
    for (Index c = 0; c < n; ++c) {
      if (!valid[static_cast<std::size_t>(c)]) continue;
      if (!states.col(c).allFinite()) {
        valid[static_cast<std::size_t>(c)] = false;
        returns[c] = -std::numeric_limits<double>::infinity();
        continue;
      }
      returns[c] += reward(states.col(c), actions.col(c));
    }
  }
  for (Index c = 0; c < n; ++c) {
    if (!std::isfinite(returns[c])) returns[c] = -std::numeric_limits<double>::infinity();
  }
  return returns;
}

double rollout_return(const TransitionModel& model, const RewardFn& reward, const Eigen::VectorXd& s0,
                      const Eigen::MatrixXd& actions) {
  const Index adim = actions.cols();
  Eigen::MatrixXd flat(actions.rows() * adim, 1);
  for (Index k = 0; k < actions.rows(); ++k) flat.block(k * adim, 0, adim, 1) = actions.row(k).transpose();
  return rollout_returns(model, reward, s0, flat, adim)[0];
}

CEMResult cem_plan(const TransitionModel& model, const RewardFn& reward, const Eigen::VectorXd& s0,
                   const CEMConfig& config, const Plan* warm_start, Engine& rng) {
  config.validate();
  const Index adim = config.action_dim();
  const Index h = config.horizon;
  const Index n = config.population;
  const int n_elite = config.elite_count();

  CEMResult out;
  out.plan = warm_start ? *warm_start : initial_plan(config);
  if (out.plan.mu.rows() != h || out.plan.mu.cols() != adim) {
    throw ConfigError("cem: warm start has the wrong shape");
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd samples(h * adim, n);
  std::vector<Index> order(static_cast<std::size_t>(n));

  for (int it = 0; it < config.iterations; ++it) {
    for (Index c = 0; c < n; ++c) {
      for (Index k = 0; k < h; ++k) {
        for (Index d = 0; d < adim; ++d) {
          const double a = out.plan.mu(k, d) + out.plan.sigma(k, d) * normal(rng);
          samples(k * adim + d, c) = std::clamp(a, config.action_low[d], config.action_high[d]);
        }
      }
    }
    const Eigen::VectorXd returns = rollout_returns(model, reward, s0, samples, adim);

    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return returns[a] > returns[b]; });
    Index usable = 0;
    while (usable < n_elite && std::isfinite(returns[order[static_cast<std::size_t>(usable)]])) ++usable;
    if (usable == 0) throw PlannerFailure("cem: every candidate rollout diverged");

    Eigen::MatrixXd elites(h * adim, usable);
    double elite_return = 0.0;
    for (Index e = 0; e < usable; ++e) {
      const Index c = order[static_cast<std::size_t>(e)];
      elites.col(e) = samples.col(c);
      elite_return += returns[c];
    }
    out.elite_mean_returns.push_back(elite_return / static_cast<double>(usable));

    const Eigen::VectorXd mean = elites.rowwise().mean();
    const Eigen::VectorXd var = (elites.colwise() - mean).rowwise().squaredNorm() / static_cast<double>(usable);
    for (Index k = 0; k < h; ++k) {
      for (Index d = 0; d < adim; ++d) {
        out.plan.mu(k, d) = mean[k * adim + d];
        out.plan.sigma(k, d) = std::max(std::sqrt(var[k * adim + d]), config.min_std);
      }
    }
  }
  out.actions = out.plan.mu;
  return out;
}

double EpisodeTrace::total_reward() const {
  double r = 0.0;
  for (const auto& s : steps) r += s.reward;
  return r;
}

EpisodeTrace mpc_episode(const Env& env, const TransitionModel& model, const RewardFn& reward, int K,
                         const CEMConfig& config, Engine& rng, ReplayBuffer* buffer, int task_id) {
  EpisodeTrace trace;
  Eigen::VectorXd s = env.reset();
  Plan plan = initial_plan(config);
  for (int k = 0; k < K; ++k) {
    CEMResult res;
    try {
      res = cem_plan(model, reward, s, config, &plan, rng);
    } catch (const PlannerFailure&) {
      trace.failed = true;
      break;
    }
    const Eigen::VectorXd a = env.clip_action(res.actions.row(0).transpose());
    StepResult step = env.step(s, a);
    if (buffer) buffer->add(Transition{s, a, step.state, task_id});
    trace.steps.push_back(TraceStep{s, a, step.reward, step.state});
    s = std::move(step.state);
    if (step.terminal) break;
    plan = shift_plan(res.plan, config);
  }
  return trace;
}

EpisodeTrace random_episode(const Env& env, int K, Engine& rng, ReplayBuffer* buffer, int task_id) {
  EpisodeTrace trace;
  Eigen::VectorXd s = env.reset();
  const Eigen::VectorXd lo = env.action_low();
  const Eigen::VectorXd hi = env.action_high();
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < K; ++k) {
    Eigen::VectorXd a(lo.size());
    for (Index d = 0; d < a.size(); ++d) a[d] = lo[d] + (hi[d] - lo[d]) * unit(rng);
    StepResult step = env.step(s, a);
    if (buffer) buffer->add(Transition{s, a, step.state, task_id});
    trace.steps.push_back(TraceStep{s, a, step.reward, step.state});
    s = std::move(step.state);
    if (step.terminal) break;
  }
  return trace;
}

}  // namespace hcrl
