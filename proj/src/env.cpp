#include "vat/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "vat/errors.hpp"

namespace vat {

namespace {

constexpr double kTargetTurnRate = 0.5;  // rad/s
constexpr double kDwellMin = 2.0;        // s
constexpr double kDwellMax = 6.0;        // s
constexpr double kPhase1SpeedMin = 5.0;  // m/s
constexpr std::array<double, 4> kBehaviorWeights = {0.1, 0.5, 0.2, 0.2};

Vec3 heading_vector(double yaw) { return {std::cos(yaw), std::sin(yaw), 0.0}; }

}  // namespace

std::string_view action_name(Action a) {
  switch (a) {
    case Action::forward: return "forward";
    case Action::backward: return "backward";
    case Action::leftward: return "leftward";
    case Action::rightward: return "rightward";
    case Action::turn_left: return "turn_left";
    case Action::turn_right: return "turn_right";
    case Action::stop: return "stop";
  }
  return "unknown";
}

void EpisodeConfig::validate() const {
  if (!(lost_threshold > 0)) throw std::invalid_argument("EpisodeConfig: lost_threshold must be positive");
  if (!(max_steps > lost_threshold)) {
    throw std::invalid_argument("EpisodeConfig: max_steps must exceed lost_threshold");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("EpisodeConfig: dt must be positive");
  if (!(drone_speed >= 0.0) || !(drone_yaw_rate >= 0.0)) {
    throw std::invalid_argument("EpisodeConfig: drone speeds must be non-negative");
  }
  if (!(target_max_speed >= 0.0)) throw std::invalid_argument("EpisodeConfig: target_max_speed must be non-negative");
  if (phase != 1 && phase != 2) throw std::invalid_argument("EpisodeConfig: phase must be 1 or 2");
  if (!(altitude_min > ground_height && altitude_max >= altitude_min)) {
    throw std::invalid_argument("EpisodeConfig: altitude range must lie above the ground");
  }
  if (!(pitch_min > 0.0 && pitch_max >= pitch_min && pitch_max <= 0.5 * std::numbers::pi)) {
    throw std::invalid_argument("EpisodeConfig: pitch range must lie in (0, pi/2]");
  }
  if (!(offset_min >= 0.0 && offset_max >= offset_min)) {
    throw std::invalid_argument("EpisodeConfig: target offset range is invalid");
  }
  if (!(occlusion_prob >= 0.0 && occlusion_prob <= 1.0) || occlusion_min_steps < 0 ||
      occlusion_max_steps < occlusion_min_steps) {
    throw std::invalid_argument("EpisodeConfig: occlusion parameters are invalid");
  }
  reward.validate();
  // The shallowest pitch must still put the top image edge below the horizon.
  if (!(std::tan(pitch_min) > 0.5 * camera.height / camera.focal)) {
    throw std::invalid_argument("EpisodeConfig: pitch_min shows the horizon for this camera");
  }
}

bool WorldState::operator==(const WorldState& o) const {
  return drone.position == o.drone.position && drone.yaw == o.drone.yaw &&
         drone.gimbal_pitch == o.drone.gimbal_pitch && target.position == o.target.position &&
         target.heading == o.target.heading && target.speed == o.target.speed &&
         target.behavior == o.target.behavior &&
         target.behavior_time_left == o.target.behavior_time_left && step == o.step &&
         lost_steps == o.lost_steps && occluded_steps == o.occluded_steps && done == o.done;
}

RigidTransform camera_pose(const DroneState& drone) {
  const double cy = std::cos(drone.yaw), sy = std::sin(drone.yaw);
  const double cp = std::cos(drone.gimbal_pitch), sp = std::sin(drone.gimbal_pitch);
  const Vec3 optical(cp * cy, cp * sy, -sp);
  const Vec3 x_axis = -optical;
  const Vec3 y_axis(sy, -cy, 0.0);
  const Vec3 z_axis = x_axis.cross(y_axis);
  Mat3 r;
  r.col(0) = x_axis;
  r.col(1) = y_axis;
  r.col(2) = z_axis;
  return {r, drone.position};
}

Behavior sample_behavior(Rng& rng) {
  return static_cast<Behavior>(rng.categorical(kBehaviorWeights));
}

TargetState target_update(const TargetState& target, int phase, double dt, double max_speed, Rng& rng) {
  TargetState next = target;
  if (phase == 2) {
    next.behavior_time_left -= dt;
    if (next.behavior_time_left <= 0.0) {
      next.behavior = sample_behavior(rng);
      next.speed = rng.uniform(0.0, max_speed);
      next.behavior_time_left = rng.uniform(kDwellMin, kDwellMax);
    }
  }
  switch (next.behavior) {
    case Behavior::stop: return next;
    case Behavior::turn_left: next.heading += kTargetTurnRate * dt; break;
    case Behavior::turn_right: next.heading -= kTargetTurnRate * dt; break;
    case Behavior::straight: break;
  }
  next.position += next.speed * dt * heading_vector(next.heading);
  return next;
}

ObservationStack::ObservationStack(ObservationMode mode) : mode_(mode) {}

int ObservationStack::frame_size(ObservationMode mode) {
  const int tail = 1 + 2 + kNumActions;  // visible, altitude, pitch, previous action
  return mode == ObservationMode::features ? 2 + tail : kGridCells * kGridCells + tail;
}

std::vector<double> ObservationStack::make_frame(const ImagePoint* seen, const EpisodeConfig& cfg,
                                                 const DroneState& drone,
                                                 std::optional<Action> prev_action) {
  if (seen != nullptr) {
    last_u_ = std::clamp(seen->u / (0.5 * cfg.camera.width), -1.0, 1.0);
    last_v_ = std::clamp(seen->v / (0.5 * cfg.camera.height), -1.0, 1.0);
  }
  std::vector<double> frame;
  frame.reserve(frame_size(mode_));
  if (mode_ == ObservationMode::features) {
    frame.push_back(last_u_);
    frame.push_back(last_v_);
  } else {
    std::vector<double> grid(kGridCells * kGridCells, 0.0);
    if (seen != nullptr || last_u_ != 0.0 || last_v_ != 0.0) {
      auto cell = [](double x) {
        return std::clamp(static_cast<int>((x + 1.0) * 0.5 * kGridCells), 0, kGridCells - 1);
      };
      // Image up (+v) is row 0.
      grid[cell(-last_v_) * kGridCells + cell(last_u_)] = 1.0;
    }
    frame.insert(frame.end(), grid.begin(), grid.end());
  }
  frame.push_back(seen != nullptr ? 1.0 : 0.0);
  const double alt = drone.position.z() - cfg.ground_height;
  const double alt_span = cfg.altitude_max - cfg.altitude_min;
  const double pitch_span = cfg.pitch_max - cfg.pitch_min;
  frame.push_back(alt_span > 0.0 ? (alt - cfg.altitude_min) / alt_span : 0.0);
  frame.push_back(pitch_span > 0.0 ? (drone.gimbal_pitch - cfg.pitch_min) / pitch_span : 0.0);
  for (int a = 0; a < kNumActions; ++a) {
    frame.push_back(prev_action && static_cast<int>(*prev_action) == a ? 1.0 : 0.0);
  }
  return frame;
}

void ObservationStack::reset(const ImagePoint* seen, const EpisodeConfig& cfg, const DroneState& drone) {
  last_u_ = 0.0;
  last_v_ = 0.0;
  const auto frame = make_frame(seen, cfg, drone, std::nullopt);
  frames_.assign(kFrames, frame);
  values_.clear();
  for (const auto& f : frames_) values_.insert(values_.end(), f.begin(), f.end());
}

void ObservationStack::push(const ImagePoint* seen, const EpisodeConfig& cfg, const DroneState& drone,
                            std::optional<Action> prev_action) {
  frames_.push_front(make_frame(seen, cfg, drone, prev_action));
  frames_.pop_back();
  values_.clear();
  for (const auto& f : frames_) values_.insert(values_.end(), f.begin(), f.end());
}

TrackingEnv::TrackingEnv(EpisodeConfig cfg) : cfg_(std::move(cfg)), obs_(cfg_.observation) {
  cfg_.validate();
  state_.done = true;
}

void TrackingEnv::set_phase(int phase) {
  if (phase != 1 && phase != 2) throw std::invalid_argument("TrackingEnv: phase must be 1 or 2");
  cfg_.phase = phase;
}

RewardView TrackingEnv::reward_view() const {
  const RigidTransform t_cw = camera_pose(state_.drone);
  const PlaneCoeffs ground_c = plane_in_frame(PlaneCoeffs::ground(cfg_.ground_height), t_cw.inverse());
  return make_reward_view(cfg_.camera, ground_c, cfg_.reward);
}

std::optional<ImagePoint> TrackingEnv::target_in_image() const {
  const Vec3 p_cam = world_to_camera(camera_pose(state_.drone), state_.target.position);
  if (!(p_cam.x() < 0.0)) return std::nullopt;
  return project_to_image(cfg_.camera, p_cam);
}

StepResult TrackingEnv::evaluate() const {
  const RewardView view = reward_view();
  const Vec3 p_g = world_to_camera(camera_pose(state_.drone), state_.target.position);
  StepResult r;
  r.r_gc = goal_centered_reward(p_g, view, cfg_.reward);
  r.r_dt = sparse_reward(p_g, view.full);
  r.info.phi = deviation(p_g, view.full).phi;
  r.info.r_distance = distance_reward(p_g, view.full, max_offset_distance(view.full));
  return r;
}

const std::vector<double>& TrackingEnv::reset(std::uint64_t seed, ResetOptions options) {
  rng_ = Rng(seed);
  state_ = WorldState{};

  const double altitude = rng_.uniform(cfg_.altitude_min, cfg_.altitude_max);
  const double pitch = rng_.uniform(cfg_.pitch_min, cfg_.pitch_max);
  const double heading = rng_.uniform(-std::numbers::pi, std::numbers::pi);
  const double sampled_offset = rng_.uniform(-std::numbers::pi, std::numbers::pi);
  const double yaw_offset = options.yaw_offset.value_or(sampled_offset);
  const double side = rng_.uniform() < 0.5 ? -1.0 : 1.0;
  const double along = side * rng_.uniform(cfg_.offset_min, cfg_.offset_max);

  DroneState& drone = state_.drone;
  drone.yaw = heading + yaw_offset;
  drone.gimbal_pitch = pitch;
  drone.position = Vec3(0.0, 0.0, cfg_.ground_height + altitude);

  TargetState& target = state_.target;
  target.heading = heading;
  target.position = Vec3(0.0, 0.0, cfg_.ground_height) + along * heading_vector(drone.yaw);
  if (cfg_.phase == 1) {
    target.behavior = Behavior::straight;
    target.speed = rng_.uniform(std::min(kPhase1SpeedMin, cfg_.target_max_speed), cfg_.target_max_speed);
    target.behavior_time_left = 0.0;
  } else {
    target.behavior = sample_behavior(rng_);
    target.speed = rng_.uniform(0.0, cfg_.target_max_speed);
    target.behavior_time_left = rng_.uniform(kDwellMin, kDwellMax);
  }

  // Place the drone so that the image center projects onto the target.
  const RigidTransform t_cw = camera_pose(drone);
  const PlaneCoeffs ground_c = plane_in_frame(PlaneCoeffs::ground(cfg_.ground_height), t_cw.inverse());
  const Vec3 cg_world = camera_to_world(t_cw, project_frustum(cfg_.camera, ground_c).cg);
  drone.position.x() += target.position.x() - cg_world.x();
  drone.position.y() += target.position.y() - cg_world.y();

  last_ = evaluate();
  last_.info.visible = false;
  const auto ip = target_in_image();
  if (ip && ip->visible) last_.info.visible = true;
  obs_.reset(last_.info.visible ? &*ip : nullptr, cfg_, drone);
  return obs_.values();
}

StepResult TrackingEnv::step(Action action) {
  if (state_.done) throw StepAfterDone("TrackingEnv::step called on a finished episode");

  DroneState& drone = state_.drone;
  const double move = cfg_.drone_speed * cfg_.dt;
  const Vec3 fwd = heading_vector(drone.yaw);
  const Vec3 left(-fwd.y(), fwd.x(), 0.0);
  switch (action) {
    case Action::forward: drone.position += move * fwd; break;
    case Action::backward: drone.position -= move * fwd; break;
    case Action::leftward: drone.position += move * left; break;
    case Action::rightward: drone.position -= move * left; break;
    case Action::turn_left: drone.yaw += cfg_.drone_yaw_rate * cfg_.dt; break;
    case Action::turn_right: drone.yaw -= cfg_.drone_yaw_rate * cfg_.dt; break;
    case Action::stop: break;
  }

  state_.target = target_update(state_.target, cfg_.phase, cfg_.dt, cfg_.target_max_speed, rng_);

  bool occluded = false;
  if (cfg_.phase == 2) {
    if (state_.occluded_steps == 0 && rng_.uniform() < cfg_.occlusion_prob) {
      state_.occluded_steps =
          static_cast<int>(rng_.uniform_int(cfg_.occlusion_min_steps, cfg_.occlusion_max_steps));
    }
    if (state_.occluded_steps > 0) {
      occluded = true;
      --state_.occluded_steps;
    }
  }

  StepResult r = evaluate();
  state_.lost_steps = r.r_dt == 0 ? state_.lost_steps + 1 : 0;
  ++state_.step;
  if (state_.lost_steps >= cfg_.lost_threshold) {
    r.done = true;
    r.info.reason = Termination::lost;
  } else if (state_.step >= cfg_.max_steps) {
    r.done = true;
    r.info.reason = Termination::max_steps;
  }
  state_.done = r.done;

  const auto ip = target_in_image();
  const bool seen = ip && ip->visible && !occluded;
  r.info.visible = seen;
  obs_.push(seen ? &*ip : nullptr, cfg_, drone, action);
  last_ = r;
  return r;
}

}  // namespace vat
