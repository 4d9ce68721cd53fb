#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "vat/geometry.hpp"
#include "vat/reward.hpp"
#include "vat/rng.hpp"

namespace vat {

enum class Action : int {
  forward = 0,
  backward = 1,
  leftward = 2,
  rightward = 3,
  turn_left = 4,
  turn_right = 5,
  stop = 6,
};
inline constexpr int kNumActions = 7;

std::string_view action_name(Action a);

/// Target behavior codes 0-stop, 1-go straight, 2-turn left, 3-turn right.
enum class Behavior : int { stop = 0, straight = 1, turn_left = 2, turn_right = 3 };

enum class ObservationMode { features, occupancy_grid };

struct DroneState {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double gimbal_pitch = 1.0;
};

struct TargetState {
  Vec3 position = Vec3::Zero();
  double heading = 0.0;
  double speed = 0.0;
  Behavior behavior = Behavior::straight;
  /// Seconds until the phase-2 schedule draws a new behavior.
  double behavior_time_left = 0.0;
};

struct EpisodeConfig {
  int max_steps = 1500;
  int lost_threshold = 100;
  double dt = 0.04;
  double drone_speed = 40.0;
  double drone_yaw_rate = 2.0;
  double target_max_speed = 20.0;
  int phase = 1;

  CameraIntrinsics camera = CameraIntrinsics::make(84.0, 84.0, 1.0);
  RewardConfig reward;
  ObservationMode observation = ObservationMode::features;

  double ground_height = 0.0;
  double altitude_min = 13.0, altitude_max = 22.0;
  double pitch_min = 0.6, pitch_max = 1.38;
  double offset_min = 2.5, offset_max = 4.5;

  // Phase-2 occlusion emulation.
  double occlusion_prob = 0.05;
  int occlusion_min_steps = 5, occlusion_max_steps = 20;

  /// Throws std::invalid_argument on any violated invariant.
  void validate() const;
};

struct WorldState {
  DroneState drone;
  TargetState target;
  int step = 0;
  int lost_steps = 0;
  int occluded_steps = 0;
  bool done = false;

  bool operator==(const WorldState& o) const;
};

/// Camera pose T_cw: optical axis pitched down by the gimbal angle from the
/// drone heading, image +y to the drone's right, centered at the drone.
RigidTransform camera_pose(const DroneState& drone);

/// Phase 1 keeps heading and speed. Phase 2 decrements the behavior dwell
/// time and, when it expires, redraws behavior (stop .1, straight .5, left .2,
/// right .2), speed ~ U[0, max_speed] and dwell ~ U[2, 6] s. Turns rotate the
/// heading at 0.5 rad/s; `stop` does not move.
TargetState target_update(const TargetState& target, int phase, double dt, double max_speed, Rng& rng);

/// Draws a phase-2 behavior from the schedule probabilities.
Behavior sample_behavior(Rng& rng);

enum class Termination { none, lost, max_steps };

struct StepInfo {
  double phi = 0.0;
  double r_distance = 0.0;
  bool visible = false;
  Termination reason = Termination::none;
};

struct StepResult {
  double r_gc = 0.0;
  int r_dt = 0;
  bool done = false;
  StepInfo info;
};

/// Frame-stacked observation built from the target's image position.
class ObservationStack {
 public:
  static constexpr int kFrames = 4;
  static constexpr int kGridCells = 11;

  explicit ObservationStack(ObservationMode mode = ObservationMode::features);

  static int frame_size(ObservationMode mode);
  static int size(ObservationMode mode) { return kFrames * frame_size(mode); }

  /// Clears the last-seen cache and fills every slot with the given frame.
  void reset(const ImagePoint* seen, const EpisodeConfig& cfg, const DroneState& drone);
  /// `seen` is null when the target is not observed this step.
  void push(const ImagePoint* seen, const EpisodeConfig& cfg, const DroneState& drone,
            std::optional<Action> prev_action);

  /// Newest frame first.
  const std::vector<double>& values() const { return values_; }

 private:
  std::vector<double> make_frame(const ImagePoint* seen, const EpisodeConfig& cfg,
                                 const DroneState& drone, std::optional<Action> prev_action);

  ObservationMode mode_;
  double last_u_ = 0.0, last_v_ = 0.0;
  std::deque<std::vector<double>> frames_;
  std::vector<double> values_;
};

struct ResetOptions {
  /// Pins the drone yaw relative to the target heading instead of sampling it.
  std::optional<double> yaw_offset;
};

/// Kinematic drone-over-ground tracking episode.
class TrackingEnv {
 public:
  explicit TrackingEnv(EpisodeConfig cfg);

  const std::vector<double>& reset(std::uint64_t seed, ResetOptions options = {});
  StepResult step(Action action);

  void set_phase(int phase);

  const EpisodeConfig& config() const { return cfg_; }
  const WorldState& state() const { return state_; }
  const std::vector<double>& observation() const { return obs_.values(); }
  /// Rewards of the current state (the reset pose before the first step).
  const StepResult& last() const { return last_; }

  /// Target image position for the current pose; nullopt when behind the camera.
  std::optional<ImagePoint> target_in_image() const;
  RewardView reward_view() const;

 private:
  StepResult evaluate() const;

  EpisodeConfig cfg_;
  Rng rng_;
  WorldState state_;
  ObservationStack obs_;
  StepResult last_;
};

}  // namespace vat
