#include "hcrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hcrl/errors.hpp"

namespace hcrl {

EnvName parse_env_name(std::string_view name) {
  if (name == "slide") return EnvName::Slide;
  if (name == "push") return EnvName::Push;
  if (name == "latch") return EnvName::Latch;
  throw UsageError("unknown env '" + std::string(name) + "' (valid: slide, push, latch)");
}

std::string_view to_string(EnvName name) {
  switch (name) {
    case EnvName::Slide: return "slide";
    case EnvName::Push: return "push";
    case EnvName::Latch: return "latch";
  }
  return "?";
}

Eigen::VectorXd Env::clip_action(const Eigen::VectorXd& a) const {
  if (a.size() != action_dim()) throw ConfigError("env: action has wrong dimension");
  return a.cwiseMax(action_low()).cwiseMin(action_high());
}

namespace {

double corner_reward(const Eigen::VectorXd& corners, const Eigen::VectorXd& goal) {
  double r = 0.0;
  for (Index i = 0; i < 4; ++i) {
    r += 1.0 - std::tanh(10.0 * (corners.segment<2>(2 * i) - goal.segment<2>(2 * i)).norm());
  }
  return r;
}

void check_dims(const Env& env, const Eigen::VectorXd& s, const Eigen::VectorXd& a) {
  if (s.size() != env.state_dim() || a.size() != env.action_dim()) {
    throw ConfigError("env step: state/action dimension mismatch");
  }
}

}  // namespace

// --- slide ------------------------------------------------------------------

namespace {

// The ee stroke ends before the spot where block 1 comes to rest after
// handing its velocity to block 2, so each episode has a single launch.
const Eigen::Vector2d kSlideEeStart(0.0, 0.0);
const Eigen::Vector2d kSlideBlock1Start(0.04, 0.0);
const Eigen::Vector2d kSlideBlock2Start(0.095, 0.0);
const Eigen::Vector2d kSlideGoal(0.35, 0.0);
constexpr double kSlideEeMin[2] = {-0.03, -0.02};
constexpr double kSlideEeMax[2] = {0.02, 0.02};

// Exact constant-deceleration kinematics over one substep.
void coast(double& x, double& v, double mu, double tau) {
  if (v <= 0.0) {
    v = 0.0;
    return;
  }
  const double decel = mu * kGravity;
  if (v / decel <= tau) {
    x += v * v / (2.0 * decel);
    v = 0.0;
  } else {
    x += v * tau - 0.5 * decel * tau * tau;
    v -= decel * tau;
  }
}

}  // namespace

Eigen::VectorXd SlideEnv::corners_at(const Eigen::Vector2d& c) {
  const double h = kHalfSize;
  Eigen::VectorXd out(8);
  out << c.x() - h, c.y() - h, c.x() + h, c.y() - h, c.x() + h, c.y() + h, c.x() - h, c.y() + h;
  return out;
}

Eigen::Vector2d SlideEnv::block_center(const Eigen::VectorXd& s, int block) {
  const Index off = block == 1 ? 2 : 10;
  Eigen::Vector2d c = Eigen::Vector2d::Zero();
  for (Index i = 0; i < 4; ++i) c += s.segment<2>(off + 2 * i);
  return c / 4.0;
}

Eigen::VectorXd SlideEnv::make_state(const Eigen::Vector2d& ee, const Eigen::Vector2d& c1,
                                     const Eigen::Vector2d& c2, double v1, double v2) {
  Eigen::VectorXd s(kStateDim);
  s << ee, corners_at(c1), corners_at(c2), v1, v2;
  return s;
}

Eigen::VectorXd SlideEnv::goal_corners() { return corners_at(kSlideGoal); }

Eigen::VectorXd SlideEnv::reset() const {
  return make_state(kSlideEeStart, kSlideBlock1Start, kSlideBlock2Start, 0.0, 0.0);
}

Eigen::VectorXd SlideEnv::action_low() const { return Eigen::VectorXd::Constant(kActionDim, -kMaxStep); }
Eigen::VectorXd SlideEnv::action_high() const { return Eigen::VectorXd::Constant(kActionDim, kMaxStep); }

StepResult SlideEnv::step(const Eigen::VectorXd& s, const Eigen::VectorXd& a_raw) const {
  check_dims(*this, s, a_raw);
  const Eigen::VectorXd a = clip_action(a_raw);
  Eigen::Vector2d ee = s.head<2>();
  Eigen::Vector2d c1 = block_center(s, 1);
  Eigen::Vector2d c2 = block_center(s, 2);
  double v1 = s[kV1];
  double v2 = s[kV2];

  const Eigen::Vector2d v_ee = a / dt();
  const double tau = dt() / kSubsteps;

  // The ee hands its x velocity to a block whose back face it crosses.
  auto contact = [&](const Eigen::Vector2d& prev, Eigen::Vector2d& c, double& v) {
    const double back = c.x() - kHalfSize;
    if (v_ee.x() > 0.0 && std::abs(ee.y() - c.y()) <= kHalfSize && prev.x() <= back + 1e-12 &&
        ee.x() > back) {
      c.x() = ee.x() + kHalfSize;
      v = std::max(v, v_ee.x());
    }
  };

  for (int i = 0; i < kSubsteps; ++i) {
    const Eigen::Vector2d prev = ee;
    ee += v_ee * tau;
    for (int d = 0; d < 2; ++d) ee[d] = std::clamp(ee[d], kSlideEeMin[d], kSlideEeMax[d]);
    contact(prev, c1, v1);
    contact(prev, c2, v2);
    coast(c1.x(), v1, params_.mu1, tau);
    // Equal masses, restitution 1: velocities swap; the front block is
    // moved out of any overlap.
    if (c1.x() + kHalfSize > c2.x() - kHalfSize) {
      if (v1 > v2) std::swap(v1, v2);
      c2.x() = c1.x() + 2.0 * kHalfSize;
    }
    coast(c2.x(), v2, params_.mu2, tau);
  }

  StepResult out;
  out.state = make_state(ee, c1, c2, v1, v2);
  if (c1 == block_center(s, 1)) out.state.segment<8>(2) = s.segment<8>(2);
  if (c2 == block_center(s, 2)) out.state.segment<8>(10) = s.segment<8>(10);
  out.reward = reward(out.state, a);
  return out;
}

double SlideEnv::reward(const Eigen::VectorXd& s_next, const Eigen::VectorXd& a) const {
  return corner_reward(s_next.segment<8>(10), goal_corners()) - 0.1 * a.norm();
}

// --- push -------------------------------------------------------------------

namespace {

const Eigen::Vector2d kPushEeStart(0.0, -0.07);
const Eigen::Vector2d kPushGoal(0.0, 0.25);

Eigen::Matrix2d rotation(double angle) {
  Eigen::Matrix2d r;
  r << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  return r;
}

}  // namespace

double push_com_offset(const PushTaskParams& p, double width) {
  return (p.density_right - p.density_left) / (p.density_right + p.density_left) * (width / 4.0);
}

double PushEnv::com_offset() const { return push_com_offset(params_, kWidth); }

double PushEnv::inertia_per_mass() const {
  const double half_w = kWidth / 2.0;
  const double own = (half_w * half_w + kDepth * kDepth) / 12.0;
  const double ml = params_.density_left;
  const double mr = params_.density_right;
  const double xc = com_offset();
  const double dl = -kWidth / 4.0 - xc;
  const double dr = kWidth / 4.0 - xc;
  return own + (ml * dl * dl + mr * dr * dr) / (ml + mr);
}

Eigen::VectorXd PushEnv::corners_of(const Pose& pose) {
  const Eigen::Matrix2d r = rotation(pose.angle);
  const double hw = kWidth / 2.0;
  const double hd = kDepth / 2.0;
  const Eigen::Vector2d local[4] = {{-hw, -hd}, {hw, -hd}, {hw, hd}, {-hw, hd}};
  Eigen::VectorXd out(8);
  for (int i = 0; i < 4; ++i) out.segment<2>(2 * i) = pose.center + r * local[i];
  return out;
}

PushEnv::Pose PushEnv::pose_from_state(const Eigen::VectorXd& s) {
  Pose p;
  p.center.setZero();
  for (Index i = 0; i < 4; ++i) p.center += s.segment<2>(2 + 2 * i);
  p.center /= 4.0;
  const Eigen::Vector2d edge = s.segment<2>(4) - s.segment<2>(2);
  p.angle = std::atan2(edge.y(), edge.x());
  return p;
}

Eigen::VectorXd PushEnv::make_state(const Eigen::Vector2d& ee_world, const Pose& pose) {
  Eigen::VectorXd s(kStateDim);
  s << ee_world - pose.center, corners_of(pose);
  return s;
}

Eigen::VectorXd PushEnv::goal_corners() { return corners_of(Pose{kPushGoal, 0.0}); }

Eigen::VectorXd PushEnv::reset() const { return make_state(kPushEeStart, Pose{{0.0, 0.0}, 0.0}); }

Eigen::VectorXd PushEnv::action_low() const { return Eigen::VectorXd::Constant(kActionDim, -kMaxStep); }
Eigen::VectorXd PushEnv::action_high() const { return Eigen::VectorXd::Constant(kActionDim, kMaxStep); }

StepResult PushEnv::step(const Eigen::VectorXd& s, const Eigen::VectorXd& a_raw) const {
  check_dims(*this, s, a_raw);
  const Eigen::VectorXd a = clip_action(a_raw);
  Pose pose = pose_from_state(s);
  Eigen::Vector2d ee = pose.center + s.head<2>();
  const Eigen::Vector2d com(com_offset(), 0.0);
  const double k_inertia = inertia_per_mass();
  const double hw = kWidth / 2.0;
  const double hd = kDepth / 2.0;

  for (int i = 0; i < kSubsteps; ++i) {
    ee += a / kSubsteps;
    const Eigen::Matrix2d r = rotation(pose.angle);
    const Eigen::Vector2d p = r.transpose() * (ee - pose.center);
    if (std::abs(p.x()) >= hw || std::abs(p.y()) >= hd) continue;

    // Shallowest face wins; the block is pushed out along its normal.
    const double pen[4] = {p.x() + hw, hw - p.x(), p.y() + hd, hd - p.y()};
    const Eigen::Vector2d normals[4] = {{-1, 0}, {1, 0}, {0, -1}, {0, 1}};
    const int face = static_cast<int>(std::min_element(pen, pen + 4) - pen);
    const Eigen::Vector2d push = -normals[face] * pen[face];
    const Eigen::Vector2d contact = p + normals[face] * pen[face];
    const Eigen::Vector2d lever = contact - com;
    const double torque = lever.x() * push.y() - lever.y() * push.x();
    const double dtheta = kRotationGain * torque / k_inertia;

    // Rotate about the center of mass, then translate by the push.
    const Eigen::Vector2d com_world = pose.center + r * com + r * push;
    pose.angle += dtheta;
    pose.center = com_world - rotation(pose.angle) * com;
  }

  StepResult out;
  out.state = make_state(ee, pose);
  out.reward = reward(out.state, a);
  return out;
}

double PushEnv::reward(const Eigen::VectorXd& s_next, const Eigen::VectorXd& a) const {
  return corner_reward(s_next.segment<8>(2), goal_corners()) - 0.25 * a.norm();
}

// --- latch ------------------------------------------------------------------

namespace {

const Eigen::Vector2d kLatchEeStart(0.35, 0.2);
constexpr double kLatchEeStep = 0.05;
constexpr double kLatchTurnStep = 0.2;

}  // namespace

double LatchEnv::direction_sign() const {
  return params_.direction == TurnDirection::CCW ? -1.0 : 1.0;
}

Eigen::Vector2d LatchEnv::handle_position(double door_angle) {
  return kHandleRadius * Eigen::Vector2d(std::cos(door_angle), std::sin(door_angle));
}

Eigen::VectorXd LatchEnv::reset() const {
  Eigen::VectorXd s(kStateDim);
  s << 0.0, 0.0, 0.0, 0.0, kLatchEeStart;
  return s;
}

Eigen::VectorXd LatchEnv::action_low() const {
  Eigen::VectorXd v(kActionDim);
  v << -kLatchEeStep, -kLatchEeStep, -kLatchTurnStep;
  return v;
}

Eigen::VectorXd LatchEnv::action_high() const { return -action_low(); }

StepResult LatchEnv::step(const Eigen::VectorXd& s, const Eigen::VectorXd& a_raw) const {
  check_dims(*this, s, a_raw);
  const Eigen::VectorXd a = clip_action(a_raw);
  const double door = s[0];
  const double handle = s[2];
  const Eigen::Vector2d ee = s.segment<2>(4);
  const Eigen::Vector2d move = a.head<2>();

  const bool gripped = (ee - handle_position(door)).norm() <= kGripRadius;

  double new_handle = handle;
  if (params_.handle != HandleType::None && gripped) {
    new_handle = std::clamp(handle + a[2], -kMaxHandleAngle, kMaxHandleAngle);
  } else {
    new_handle = 0.5 * handle;  // spring return
  }

  const bool released = params_.handle == HandleType::None || door > 0.0 ||
                        direction_sign() * new_handle >= params_.threshold;

  double new_door = door;
  if (gripped && released) {
    const Eigen::Vector2d tangent(-std::sin(door), std::cos(door));
    new_door = std::clamp(door + move.dot(tangent) / kHandleRadius, 0.0, kMaxDoorAngle);
  }

  StepResult out;
  out.state.resize(kStateDim);
  out.state << new_door, (new_door - door) / dt(), new_handle, (new_handle - handle) / dt(), ee + move;
  out.reward = reward(out.state, a);
  return out;
}

double LatchEnv::reward(const Eigen::VectorXd& s_next, const Eigen::VectorXd& /*a*/) const {
  const double dist = (s_next.segment<2>(4) - handle_position(s_next[0])).norm();
  return -dist - std::log(dist + kEpsilon) + 50.0 * s_next[0] + 20.0 * direction_sign() * s_next[2];
}

// --- sequences --------------------------------------------------------------

EnvSpec default_env_spec(EnvName name) {
  EnvSpec spec;
  spec.name = name;
  spec.dt = kControlDt;
  switch (name) {
    case EnvName::Slide:
      spec.state_dim = SlideEnv::kStateDim;
      spec.action_dim = SlideEnv::kActionDim;
      spec.K = SlideEnv::kEpisodeLength;
      for (double mu2 : {0.06, 0.02, 0.10, 0.04, 0.08}) spec.tasks.emplace_back(SlideTaskParams{0.05, mu2});
      break;
    case EnvName::Push:
      spec.state_dim = PushEnv::kStateDim;
      spec.action_dim = PushEnv::kActionDim;
      spec.K = PushEnv::kEpisodeLength;
      for (auto [l, r] : {std::pair{500.0, 500.0}, {100.0, 500.0}, {500.0, 100.0}, {500.0, 250.0},
                          {250.0, 500.0}}) {
        spec.tasks.emplace_back(PushTaskParams{l, r});
      }
      break;
    case EnvName::Latch:
      spec.state_dim = LatchEnv::kStateDim;
      spec.action_dim = LatchEnv::kActionDim;
      spec.K = LatchEnv::kEpisodeLength;
      spec.tasks.emplace_back(LatchTaskParams{HandleType::None, TurnDirection::CW, 0.0});
      spec.tasks.emplace_back(LatchTaskParams{HandleType::Round, TurnDirection::CW, 0.6});
      spec.tasks.emplace_back(LatchTaskParams{HandleType::Lever, TurnDirection::CW, 0.3});
      spec.tasks.emplace_back(LatchTaskParams{HandleType::Round, TurnDirection::CCW, 0.6});
      spec.tasks.emplace_back(LatchTaskParams{HandleType::Lever, TurnDirection::CCW, 0.3});
      break;
  }
  return spec;
}

std::unique_ptr<Env> make_env(const TaskParams& params) {
  return std::visit(
      [](const auto& p) -> std::unique_ptr<Env> {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SlideTaskParams>) return std::make_unique<SlideEnv>(p);
        if constexpr (std::is_same_v<T, PushTaskParams>) return std::make_unique<PushEnv>(p);
        if constexpr (std::is_same_v<T, LatchTaskParams>) return std::make_unique<LatchEnv>(p);
      },
      params);
}

std::vector<TaskInstance> make_task_sequence(const EnvSpec& spec) {
  if (spec.tasks.size() != 5) throw ConfigError("env spec must list exactly five tasks");
  std::vector<TaskInstance> out;
  for (std::size_t i = 0; i < spec.tasks.size(); ++i) {
    out.push_back(TaskInstance{static_cast<int>(i) + 1, make_env(spec.tasks[i])});
  }
  return out;
}

}  // namespace hcrl
