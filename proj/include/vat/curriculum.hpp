#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "vat/env.hpp"
#include "vat/ppo.hpp"

namespace vat {

struct StepOutcome {
  double reward = 0.0;  // training reward
  double r_gc = 0.0;    // goal-centered reward, drives the phase switch
  int r_dt = 0;
  bool done = false;
};

/// Minimal episodic interface consumed by the trainer.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual int observation_size() const = 0;
  virtual int action_count() const = 0;
  virtual const std::vector<double>& reset(std::uint64_t seed) = 0;
  virtual const std::vector<double>& observation() const = 0;
  virtual StepOutcome step(int action) = 0;
  virtual void set_phase(int phase) = 0;
};

enum class RewardKind { goal_centered, distance };

RewardKind parse_reward_kind(std::string_view s);
std::string_view reward_kind_name(RewardKind k);

/// TrackingEnv trained on either the goal-centered or the distance reward.
class TrackingTask final : public Environment {
 public:
  TrackingTask(EpisodeConfig cfg, RewardKind kind) : env_(std::move(cfg)), kind_(kind) {}

  int observation_size() const override { return ObservationStack::size(env_.config().observation); }
  int action_count() const override { return kNumActions; }
  const std::vector<double>& reset(std::uint64_t seed) override { return env_.reset(seed); }
  const std::vector<double>& observation() const override { return env_.observation(); }
  StepOutcome step(int action) override;
  void set_phase(int phase) override { env_.set_phase(phase); }

  TrackingEnv& env() { return env_; }

 private:
  TrackingEnv env_;
  RewardKind kind_;
};

/// Builds the environment for worker `index`.
using EnvFactory = std::function<std::unique_ptr<Environment>(int index)>;

struct CurriculumConfig {
  double eta = 0.6;
  int window = 10000;
  std::int64_t total_steps = 300000;
  bool enabled = true;  // false starts directly in phase 2

  /// 0 <= eta < tanh(alpha), window > 0, total_steps >= 0.
  void validate(double alpha) const;
};

struct LogRow {
  std::int64_t step = 0;
  int phase = 1;
  double mean_reward = 0.0;   // mean r_gc over the rollout
  double tsr_estimate = 0.0;  // fraction of rollout steps with r_dt = 1
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_frac = 0.0;
};

struct TrainResult {
  PolicyParams params;
  std::vector<LogRow> log;
  std::optional<std::int64_t> switch_step;  // env steps taken before phase 2
  std::int64_t steps = 0;
};

/// Two-phase PPO training. Workers step in lockstep on one thread, so the
/// result depends only on (factory, configs, seed).
TrainResult curriculum_train(const EnvFactory& factory, const PpoConfig& ppo, const CurriculumConfig& cur,
                             double alpha, std::uint64_t seed,
                             const std::function<void(const LogRow&)>& on_update = {});

void write_log_csv(std::ostream& out, const std::vector<LogRow>& log);

}  // namespace vat
