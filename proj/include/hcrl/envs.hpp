#pragma once

// Planar analytic desk-scale environments. Each exposes a known reward
// r(s', a) evaluated on the state reached by applying `a`, and a sequence of
// five tasks that differ in a single physical parameter.

#include <memory>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "hcrl/nn.hpp"

namespace hcrl {

enum class EnvName { Slide, Push, Latch };

EnvName parse_env_name(std::string_view name);
std::string_view to_string(EnvName name);

inline constexpr double kGravity = 9.81;
inline constexpr double kControlDt = 0.1;

struct StepResult {
  Eigen::VectorXd state;
  double reward = 0.0;
  bool terminal = false;
};

class Env {
 public:
  virtual ~Env() = default;

  virtual EnvName name() const = 0;
  virtual Index state_dim() const = 0;
  virtual Index action_dim() const = 0;
  virtual int episode_length() const = 0;
  double dt() const { return kControlDt; }

  /// Fixed initial state.
  virtual Eigen::VectorXd reset() const = 0;
  /// Pure: identical (state, action) give bit-identical results.
  virtual StepResult step(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const = 0;
  virtual double reward(const Eigen::VectorXd& s_next, const Eigen::VectorXd& a) const = 0;

  virtual Eigen::VectorXd action_low() const = 0;
  virtual Eigen::VectorXd action_high() const = 0;
  Eigen::VectorXd clip_action(const Eigen::VectorXd& a) const;
};

// --- block sliding --------------------------------------------------------

struct SlideTaskParams {
  double mu1 = 0.05;  // block 1, shared by all tasks
  double mu2 = 0.06;
};

/// End effector pushes block 1 along +x; block 1 slides into block 2 and
/// hands over its full velocity; block 2 coasts to a stop under friction.
///
/// State (20): ee xy, block-1 corners (4 x xy), block-2 corners (4 x xy),
/// block-1 x velocity, block-2 x velocity. Action: ee displacement, each
/// component clipped to +-0.1 m per step.
class SlideEnv final : public Env {
 public:
  static constexpr Index kStateDim = 20;
  static constexpr Index kActionDim = 2;
  static constexpr int kEpisodeLength = 30;
  static constexpr double kHalfSize = 0.025;
  static constexpr double kMaxStep = 0.1;
  static constexpr int kSubsteps = 20;
  static constexpr Index kV1 = 18;
  static constexpr Index kV2 = 19;

  explicit SlideEnv(SlideTaskParams params) : params_(params) {}

  EnvName name() const override { return EnvName::Slide; }
  Index state_dim() const override { return kStateDim; }
  Index action_dim() const override { return kActionDim; }
  int episode_length() const override { return kEpisodeLength; }
  Eigen::VectorXd reset() const override;
  StepResult step(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const override;
  double reward(const Eigen::VectorXd& s_next, const Eigen::VectorXd& a) const override;
  Eigen::VectorXd action_low() const override;
  Eigen::VectorXd action_high() const override;

  const SlideTaskParams& params() const { return params_; }

  /// Goal corners of block 2, 4 x xy.
  static Eigen::VectorXd goal_corners();
  static Eigen::VectorXd corners_at(const Eigen::Vector2d& center);
  static Eigen::Vector2d block_center(const Eigen::VectorXd& s, int block);
  /// State with the given ee position, block centers and x velocities.
  static Eigen::VectorXd make_state(const Eigen::Vector2d& ee, const Eigen::Vector2d& c1,
                                    const Eigen::Vector2d& c2, double v1, double v2);

 private:
  SlideTaskParams params_;
};

// --- pushing --------------------------------------------------------------

struct PushTaskParams {
  double density_left = 500.0;
  double density_right = 500.0;
};

/// Quasi-static point pusher against a rectangular block made of two
/// halves of different density. Penetration of the block boundary moves the
/// block out along the contact normal and rotates it about its center of
/// mass in proportion to the push torque.
///
/// State (10): ee xy relative to the block center, 4 corners xy (world).
/// Action: ee displacement, each component clipped to +-0.05 m.
class PushEnv final : public Env {
 public:
  static constexpr Index kStateDim = 10;
  static constexpr Index kActionDim = 2;
  static constexpr int kEpisodeLength = 100;
  static constexpr double kWidth = 0.12;
  static constexpr double kDepth = 0.08;
  static constexpr double kMaxStep = 0.05;
  static constexpr int kSubsteps = 10;
  static constexpr double kRotationGain = 0.3;

  explicit PushEnv(PushTaskParams params) : params_(params) {}

  EnvName name() const override { return EnvName::Push; }
  Index state_dim() const override { return kStateDim; }
  Index action_dim() const override { return kActionDim; }
  int episode_length() const override { return kEpisodeLength; }
  Eigen::VectorXd reset() const override;
  StepResult step(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const override;
  double reward(const Eigen::VectorXd& s_next, const Eigen::VectorXd& a) const override;
  Eigen::VectorXd action_low() const override;
  Eigen::VectorXd action_high() const override;

  const PushTaskParams& params() const { return params_; }

  /// Block-frame x offset of the center of mass.
  double com_offset() const;
  /// Mass-normalized moment of inertia about the center of mass.
  double inertia_per_mass() const;

  struct Pose {
    Eigen::Vector2d center;
    double angle = 0.0;
  };
  static Pose pose_from_state(const Eigen::VectorXd& s);
  static Eigen::VectorXd corners_of(const Pose& pose);
  static Eigen::VectorXd goal_corners();
  static Eigen::VectorXd make_state(const Eigen::Vector2d& ee_world, const Pose& pose);

 private:
  PushTaskParams params_;
};

/// Two-rectangle centroid: (rho_r - rho_l) / (rho_r + rho_l) * width / 4.
double push_com_offset(const PushTaskParams& p, double width = PushEnv::kWidth);

// --- door latch -----------------------------------------------------------

enum class HandleType { None, Round, Lever };
enum class TurnDirection { CW, CCW };

struct LatchTaskParams {
  HandleType handle = HandleType::None;
  TurnDirection direction = TurnDirection::CW;
  double threshold = 0.0;  // radians of handle turn that release the latch
};

/// Planar door on a hinge at the origin, handle at radius 0.5 m. The handle
/// turns only while gripped; the latch releases once the handle is turned
/// past its threshold in the task's direction; a released door follows the
/// gripper's tangential pull.
///
/// State (6): door angle, door rate, handle angle, handle rate, ee xy.
/// Action (3): ee displacement (+-0.05 m), handle turn (+-0.2 rad).
class LatchEnv final : public Env {
 public:
  static constexpr Index kStateDim = 6;
  static constexpr Index kActionDim = 3;
  static constexpr int kEpisodeLength = 100;
  static constexpr double kHandleRadius = 0.5;
  static constexpr double kGripRadius = 0.05;
  static constexpr double kMaxDoorAngle = 1.5707963267948966;
  static constexpr double kMaxHandleAngle = 1.0;
  static constexpr double kEpsilon = 1e-2;

  explicit LatchEnv(LatchTaskParams params) : params_(params) {}

  EnvName name() const override { return EnvName::Latch; }
  Index state_dim() const override { return kStateDim; }
  Index action_dim() const override { return kActionDim; }
  int episode_length() const override { return kEpisodeLength; }
  Eigen::VectorXd reset() const override;
  StepResult step(const Eigen::VectorXd& s, const Eigen::VectorXd& a) const override;
  double reward(const Eigen::VectorXd& s_next, const Eigen::VectorXd& a) const override;
  Eigen::VectorXd action_low() const override;
  Eigen::VectorXd action_high() const override;

  const LatchTaskParams& params() const { return params_; }
  /// +1 for clockwise (and handle-less) tasks, -1 for counter-clockwise.
  double direction_sign() const;
  static Eigen::Vector2d handle_position(double door_angle);

 private:
  LatchTaskParams params_;
};

// --- task sequences ---------------------------------------------------------

using TaskParams = std::variant<SlideTaskParams, PushTaskParams, LatchTaskParams>;

struct EnvSpec {
  EnvName name = EnvName::Slide;
  Index state_dim = 0;
  Index action_dim = 0;
  double dt = kControlDt;
  int K = 0;
  std::vector<TaskParams> tasks;  // always five
};

EnvSpec default_env_spec(EnvName name);
std::unique_ptr<Env> make_env(const TaskParams& params);

struct TaskInstance {
  int task_id = 0;
  std::unique_ptr<Env> env;
};

/// The five tasks in their fixed order; task ids start at 1.
std::vector<TaskInstance> make_task_sequence(const EnvSpec& spec);

}  // namespace hcrl
