#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "hcrl/planner.hpp"

using namespace hcrl;

namespace {

class StaticModel final : public TransitionModel {
 public:
  Eigen::MatrixXd predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd&) const override { return states; }
};

class LinearModel final : public TransitionModel {
 public:
  LinearModel(Eigen::MatrixXd a, Eigen::MatrixXd b) : a_(std::move(a)), b_(std::move(b)) {}
  Eigen::MatrixXd predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd& actions) const override {
    return a_ * states + b_ * actions;
  }

 private:
  Eigen::MatrixXd a_, b_;
};

class DivergentModel final : public TransitionModel {
 public:
  Eigen::MatrixXd predict(const Eigen::MatrixXd& states, const Eigen::MatrixXd&) const override {
    return Eigen::MatrixXd::Constant(states.rows(), states.cols(), std::numeric_limits<double>::quiet_NaN());
  }
};

CEMConfig scalar_config(int population, int iterations) {
  CEMConfig c;
  c.horizon = 1;
  c.population = population;
  c.iterations = iterations;
  c.action_low = Eigen::VectorXd::Constant(1, -1.0);
  c.action_high = Eigen::VectorXd::Constant(1, 1.0);
  c.init_std = Eigen::VectorXd::Constant(1, 0.5);
  return c;
}

const RewardFn kQuadratic = [](const Eigen::VectorXd&, const Eigen::VectorXd& a) {
  return -(a[0] - 0.3) * (a[0] - 0.3);
};

// Best single forward stroke on the real slide env, found by a grid search.
double scripted_slide_optimum(const SlideEnv& env) {
  double best = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 1000; ++i) {
    const double push = 0.1 * i / 1000.0;
    Eigen::VectorXd s = env.reset();
    double total = 0.0;
    for (int k = 0; k < env.episode_length(); ++k) {
      Eigen::VectorXd a = Eigen::VectorXd::Zero(2);
      if (k == 0) a[0] = push;
      const auto r = env.step(s, a);
      total += r.reward;
      s = r.state;
    }
    best = std::max(best, total);
  }
  return best;
}

}  // namespace

TEST_CASE("rollout return") {
  const SlideEnv env(SlideTaskParams{0.05, 0.06});
  const EnvModel model(env);
  const RewardFn reward = env_reward(env);

  SUBCASE("one step with the true model is the env reward") {
    Eigen::MatrixXd a(1, 2);
    a << 0.05, 0.01;
    const auto step = env.step(env.reset(), a.row(0).transpose());
    CHECK(rollout_return(model, reward, env.reset(), a) == step.reward);
  }
  SUBCASE("static model with zero actions sums the frozen-state reward") {
    const StaticModel still;
    const Eigen::MatrixXd a = Eigen::MatrixXd::Zero(7, 2);
    const double r0 = env.reward(env.reset(), Eigen::VectorXd::Zero(2));
    CHECK(rollout_return(still, reward, env.reset(), a) == doctest::Approx(7 * r0));
  }
  SUBCASE("matches a straight-line loop") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01(0.0, 1.0);
    Eigen::MatrixXd A(3, 3), B(3, 2);
    for (Index i = 0; i < 9; ++i) A(i) = 0.4 * n01(rng);
    for (Index i = 0; i < 6; ++i) B(i) = n01(rng);
    const LinearModel lin(A, B);
    const RewardFn r = [](const Eigen::VectorXd& s, const Eigen::VectorXd& a) { return s.sum() - a.squaredNorm(); };
    for (int trial = 0; trial < 10; ++trial) {
      Eigen::VectorXd s0(3);
      for (Index i = 0; i < 3; ++i) s0[i] = n01(rng);
      Eigen::MatrixXd seq(5, 2);
      for (Index i = 0; i < 10; ++i) seq(i) = n01(rng);
      double expected = 0.0;
      Eigen::VectorXd s = s0;
      for (Index k = 0; k < 5; ++k) {
        const Eigen::VectorXd a = seq.row(k).transpose();
        s = A * s + B * a;
        expected += s.sum() - a.squaredNorm();
      }
      CHECK(rollout_return(lin, r, s0, seq) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
  SUBCASE("diverging model gives minus infinity") {
    const DivergentModel bad;
    CHECK(rollout_return(bad, reward, env.reset(), Eigen::MatrixXd::Zero(3, 2)) ==
          -std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("CEM on a one-step quadratic") {
  double grid_best = -1.0, grid_val = -std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 20000; ++i) {
    const double a = -1.0 + i * 1e-4;
    const double v = -(a - 0.3) * (a - 0.3);
    if (v > grid_val) {
      grid_val = v;
      grid_best = a;
    }
  }
  const StaticModel model;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Engine rng(seed);
    const auto res = cem_plan(model, kQuadratic, Eigen::VectorXd::Zero(1), scalar_config(500, 5), nullptr, rng);
    CHECK(std::abs(res.actions(0, 0) - grid_best) < 0.02);
  }
}

TEST_CASE("CEM determinism and symmetry") {
  const StaticModel model;
  Engine r1(5), r2(5);
  const auto a = cem_plan(model, kQuadratic, Eigen::VectorXd::Zero(1), scalar_config(100, 3), nullptr, r1);
  const auto b = cem_plan(model, kQuadratic, Eigen::VectorXd::Zero(1), scalar_config(100, 3), nullptr, r2);
  CHECK(a.plan.mu == b.plan.mu);
  CHECK(a.plan.sigma == b.plan.sigma);

  const RewardFn flat = [](const Eigen::VectorXd&, const Eigen::VectorXd&) { return 1.0; };
  Engine r3(6);
  const auto c = cem_plan(model, flat, Eigen::VectorXd::Zero(1), scalar_config(500, 1), nullptr, r3);
  // Elites are an arbitrary 50 of 500 draws with std 0.5.
  CHECK(std::abs(c.actions(0, 0)) < 4.0 * 0.5 / std::sqrt(50.0));
}

TEST_CASE("elite mean return is non-decreasing across iterations") {
  const StaticModel model;
  CEMConfig cfg = scalar_config(200, 6);
  cfg.horizon = 3;
  const RewardFn smooth = [](const Eigen::VectorXd&, const Eigen::VectorXd& a) {
    return -(a[0] - 0.3) * (a[0] - 0.3);
  };
  int monotone = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    Engine rng(static_cast<std::uint64_t>(t));
    const auto res = cem_plan(model, smooth, Eigen::VectorXd::Zero(1), cfg, nullptr, rng);
    bool ok = true;
    for (std::size_t i = 1; i < res.elite_mean_returns.size(); ++i) {
      ok = ok && res.elite_mean_returns[i] >= res.elite_mean_returns[i - 1];
    }
    monotone += ok ? 1 : 0;
  }
  CHECK(monotone >= 95);
}

TEST_CASE("planner failure when every rollout diverges") {
  const DivergentModel bad;
  Engine rng(1);
  CHECK_THROWS_AS(cem_plan(bad, kQuadratic, Eigen::VectorXd::Zero(1), scalar_config(50, 2), nullptr, rng),
                  PlannerFailure);

  const SlideEnv env(SlideTaskParams{});
  const CEMConfig cfg = CEMConfig::for_env(env, 3, 20, 2);
  const auto trace = mpc_episode(env, bad, env_reward(env), 5, cfg, rng);
  CHECK(trace.failed);
  CHECK(trace.steps.empty());
}

TEST_CASE("warm start shifts and pads") {
  CEMConfig cfg = scalar_config(20, 1);
  cfg.horizon = 3;
  cfg.init_std = Eigen::VectorXd::Constant(1, 0.4);
  Plan p;
  p.mu = Eigen::MatrixXd(3, 1);
  p.mu << 0.1, 0.2, 0.3;
  p.sigma = Eigen::MatrixXd::Constant(3, 1, 0.05);
  const Plan s = shift_plan(p, cfg);
  CHECK(s.mu(0, 0) == 0.2);
  CHECK(s.mu(1, 0) == 0.3);
  CHECK(s.mu(2, 0) == 0.0);
  CHECK(s.sigma(2, 0) == 0.4);
  CHECK((s.sigma.array() > 0.0).all());
}

TEST_CASE("MPC episodes") {
  const SlideEnv env(SlideTaskParams{0.05, 0.06});
  const EnvModel model(env);
  const CEMConfig cfg = CEMConfig::for_env(env, 20, 100, 10);

  SUBCASE("K = 0 gives an empty trace") {
    Engine rng(0);
    CHECK(mpc_episode(env, model, env_reward(env), 0, cfg, rng).steps.empty());
  }
  SUBCASE("actions stay within bounds and transitions are recorded") {
    Engine rng(1);
    ReplayBuffer buf;
    buf.reset(4);
    const auto trace = mpc_episode(env, StaticModel{}, env_reward(env), 10, CEMConfig::for_env(env, 5, 30, 2), rng,
                                   &buf, 4);
    CHECK(trace.steps.size() == 10);
    CHECK(buf.size() == 10);
    for (const auto& st : trace.steps) {
      CHECK((st.a.array() >= env.action_low().array()).all());
      CHECK((st.a.array() <= env.action_high().array()).all());
    }
  }
  SUBCASE("planning with the true dynamics approaches the scripted optimum") {
    const double oracle = scripted_slide_optimum(env);
    Engine rng(2);
    const double got = mpc_episode(env, model, env_reward(env), env.episode_length(), cfg, rng).total_reward();
    CHECK(got >= 0.9 * oracle);
  }
}
