#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hcrl/envs.hpp"

using namespace hcrl;

namespace {

double slide_distance(double v, double mu) {
  const SlideEnv env(SlideTaskParams{0.05, mu});
  Eigen::VectorXd s = SlideEnv::make_state({-0.03, 0.0}, {0.04, 0.0}, {0.2, 0.0}, 0.0, v);
  const double x0 = SlideEnv::block_center(s, 2).x();
  for (int k = 0; k < 1000 && s[SlideEnv::kV2] > 0.0; ++k) s = env.step(s, Eigen::VectorXd::Zero(2)).state;
  return SlideEnv::block_center(s, 2).x() - x0;
}

// Walk to the handle, turn it in the task direction until the latch
// releases, then pull the door open along its tangent.
double scripted_latch(const LatchEnv& env, int steps) {
  Eigen::VectorXd s = env.reset();
  const double sign = env.direction_sign();
  for (int k = 0; k < steps; ++k) {
    const Eigen::Vector2d handle = LatchEnv::handle_position(s[0]);
    const Eigen::Vector2d d = handle - s.segment<2>(4);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(3);
    const bool open = env.params().handle == HandleType::None || s[0] > 0.0 ||
                      sign * s[2] >= env.params().threshold;
    if (d.norm() > 0.01) {
      a.head<2>() = d;
    } else if (!open) {
      a[2] = sign * 0.2;
    } else {
      const Eigen::Vector2d tangent(-std::sin(s[0]), std::cos(s[0]));
      const double pull = std::min(0.04, LatchEnv::kHandleRadius * (LatchEnv::kMaxDoorAngle - s[0]));
      a.head<2>() = d + pull * tangent;
      a[2] = sign * 0.2;
    }
    s = env.step(s, a).state;
  }
  return s[0];
}

}  // namespace

TEST_CASE("slide stopping distance follows constant-deceleration kinematics") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> vdist(0.1, 1.0), mudist(0.02, 0.5);
  for (int i = 0; i < 20; ++i) {
    const double v = vdist(rng);
    const double mu = mudist(rng);
    CHECK(std::abs(slide_distance(v, mu) - v * v / (2.0 * mu * 9.81)) <= 1e-6);
  }
  CHECK(slide_distance(1.0, 0.2) == doctest::Approx(0.25484).epsilon(1e-4));
}

TEST_CASE("slide env basics") {
  const SlideEnv env(SlideTaskParams{0.05, 0.06});
  const Eigen::VectorXd s0 = env.reset();
  CHECK(s0.size() == 20);

  const auto still = env.step(s0, Eigen::VectorXd::Zero(2));
  CHECK(still.state == s0);

  const Eigen::VectorXd at_goal = SlideEnv::make_state({0.0, 0.0}, {0.04, 0.0}, {0.35, 0.0}, 0.0, 0.0);
  CHECK(env.reward(at_goal, Eigen::VectorXd::Zero(2)) == 4.0);

  Eigen::VectorXd a(2);
  a << 0.05, 0.0;
  const auto r1 = env.step(s0, a);
  const auto r2 = env.step(s0, a);
  CHECK(r1.state == r2.state);
  CHECK(r1.reward == r2.reward);
  CHECK(r1.state[SlideEnv::kV2] > 0.0);

  Eigen::VectorXd big(2);
  big << 5.0, -5.0;
  CHECK(env.clip_action(big) == Eigen::Vector2d(0.1, -0.1));
}

TEST_CASE("slide task order") {
  const EnvSpec spec = default_env_spec(EnvName::Slide);
  const double expected[5] = {0.06, 0.02, 0.10, 0.04, 0.08};
  const auto seq = make_task_sequence(spec);
  REQUIRE(seq.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(seq[static_cast<std::size_t>(i)].task_id == i + 1);
    CHECK(std::get<SlideTaskParams>(spec.tasks[static_cast<std::size_t>(i)]).mu2 == expected[i]);
  }
}

TEST_CASE("push center of mass matches the two-rectangle centroid") {
  const EnvSpec spec = default_env_spec(EnvName::Push);
  REQUIRE(spec.tasks.size() == 5);
  const double w = PushEnv::kWidth;
  for (const auto& t : spec.tasks) {
    const auto p = std::get<PushTaskParams>(t);
    const double centroid = (p.density_left * (-w / 4.0) + p.density_right * (w / 4.0)) /
                            (p.density_left + p.density_right);
    CHECK(std::abs(PushEnv(p).com_offset() - centroid) <= 1e-9);
  }
  CHECK(push_com_offset(PushTaskParams{100, 500}) > 0.0);
  CHECK(push_com_offset(PushTaskParams{500, 100}) < 0.0);
}

TEST_CASE("push through the center of mass does not rotate the block") {
  for (const auto& t : default_env_spec(EnvName::Push).tasks) {
    const PushEnv env(std::get<PushTaskParams>(t));
    const Eigen::VectorXd s = PushEnv::make_state({env.com_offset(), -0.07}, PushEnv::Pose{{0.0, 0.0}, 0.0});
    Eigen::VectorXd cur = s;
    for (int k = 0; k < 4; ++k) cur = env.step(cur, Eigen::Vector2d(0.0, 0.05)).state;
    const auto pose = PushEnv::pose_from_state(cur);
    CHECK(pose.center.y() > 0.05);
    CHECK(std::abs(pose.angle) < 1e-12);
  }
  const PushEnv uniform(PushTaskParams{});
  const Eigen::VectorXd off = PushEnv::make_state({0.04, -0.07}, PushEnv::Pose{{0.0, 0.0}, 0.0});
  Eigen::VectorXd cur = off;
  for (int k = 0; k < 4; ++k) cur = uniform.step(cur, Eigen::Vector2d(0.0, 0.05)).state;
  CHECK(PushEnv::pose_from_state(cur).angle > 1e-3);
}

TEST_CASE("push goal reward") {
  const PushEnv env(PushTaskParams{});
  const auto goal = PushEnv::pose_from_state(PushEnv::make_state({0.0, 0.0}, PushEnv::Pose{{0.0, 0.25}, 0.0}));
  const Eigen::VectorXd s = PushEnv::make_state({0.0, 0.0}, goal);
  CHECK(env.reward(s, Eigen::VectorXd::Zero(2)) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("latch reward and latch rule") {
  const auto spec = default_env_spec(EnvName::Latch);
  const LatchEnv round_cw(std::get<LatchTaskParams>(spec.tasks[1]));
  Eigen::VectorXd s(6);
  s << 0.0, 0.0, 0.0, 0.0, 0.5, 0.0;
  CHECK(round_cw.reward(s, Eigen::VectorXd::Zero(3)) == doctest::Approx(4.6052).epsilon(1e-4));

  Eigen::VectorXd a(3);
  a << 0.0, 0.05, -0.2;
  for (int k = 0; k < 30; ++k) {
    s = round_cw.step(s, a).state;
    a.head<2>() = LatchEnv::handle_position(s[0]) - s.segment<2>(4);
  }
  CHECK(s[0] == 0.0);
}

TEST_CASE("a scripted policy opens every door") {
  for (const auto& t : default_env_spec(EnvName::Latch).tasks) {
    const LatchEnv env(std::get<LatchTaskParams>(t));
    CHECK(scripted_latch(env, env.episode_length()) >= 1.0);
  }
}

TEST_CASE("environment steps are pure") {
  for (EnvName name : {EnvName::Slide, EnvName::Push, EnvName::Latch}) {
    const auto seq = make_task_sequence(default_env_spec(name));
    std::mt19937_64 rng(1);
    for (const auto& task : seq) {
      const Env& env = *task.env;
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      Eigen::VectorXd s = env.reset();
      for (int k = 0; k < 20; ++k) {
        Eigen::VectorXd a(env.action_dim());
        for (Index d = 0; d < a.size(); ++d) a[d] = u(rng) * env.action_high()[d];
        const auto x = env.step(s, a);
        const auto y = env.step(s, a);
        CHECK(x.state == y.state);
        CHECK(x.reward == y.reward);
        CHECK(x.state.size() == env.state_dim());
        s = x.state;
      }
    }
  }
}
