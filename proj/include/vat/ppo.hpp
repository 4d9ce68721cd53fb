#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vat/mlp.hpp"
#include "vat/rng.hpp"

namespace vat {

struct PpoConfig {
  double gamma = 0.9;
  double gae_lambda = 0.95;
  double entropy_beta = 0.01;
  double clip_eps = 0.2;
  double value_coef = 0.5;
  int rollout_steps = 1024;  // per worker
  int minibatch = 256;
  int epochs = 4;
  double learning_rate = 3e-4;
  double max_grad_norm = 0.5;  // 0 disables clipping
  int workers = 8;
  std::vector<int> hidden = {64, 64};

  void validate() const;
};

/// Actor (categorical head) and critic (scalar head) perceptrons sharing one
/// flat parameter vector: actor parameters first, then critic parameters.
struct PolicyParams {
  MlpShape actor;
  MlpShape critic;
  std::vector<double> flat;

  static PolicyParams make(int obs_dim, int n_actions, const std::vector<int>& hidden, Rng& rng);

  int obs_dim() const { return actor.input(); }
  int n_actions() const { return actor.output(); }

  std::span<const double> actor_params() const { return {flat.data(), actor.param_count()}; }
  std::span<const double> critic_params() const {
    return {flat.data() + actor.param_count(), critic.param_count()};
  }

  /// Row-wise log pi(.|s) for the observations in the rows of `obs`.
  Matrix log_probs(const Matrix& obs) const;
  Eigen::VectorXd values(const Matrix& obs) const;

  int greedy_action(std::span<const double> obs) const;
};

/// Numerically stable row-wise log-softmax.
Matrix log_softmax(const Matrix& logits);

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

/// A_t = sum_l (gamma lambda)^l delta_{t+l}, delta_t = r_t + gamma V(s_{t+1}) - V(s_t),
/// truncated at episode ends (dones[t] != 0 means s_{t+1} is terminal).
/// `bootstrap` is V of the state following the last transition.
/// Throws std::invalid_argument when the lengths differ.
GaeResult gae_advantages(std::span<const double> rewards, std::span<const double> values,
                         std::span<const std::uint8_t> dones, double bootstrap, double gamma,
                         double lambda);

struct Batch {
  Matrix obs;  // one observation per row
  std::vector<int> actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  std::size_t size() const { return actions.size(); }
};

struct LossResult {
  double total = 0.0;
  double actor = 0.0;      // -E[min(r A, clip(r) A)] - beta H
  double critic = 0.0;     // E[(R - V)^2]
  double entropy = 0.0;
  double clip_frac = 0.0;
  double approx_kl = 0.0;
  std::vector<double> grad;  // d total / d flat params
};

/// Clipped surrogate + entropy bonus + value regression, with analytic
/// gradients. Expects normalized advantages. Throws NonFiniteLoss.
LossResult ppo_loss(const PolicyParams& params, const Batch& batch, const PpoConfig& cfg);

/// Adaptive-moment optimizer state (beta1 0.9, beta2 0.999, eps 1e-8).
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<double> m, v;
  long steps = 0;

  void step(std::span<double> params, std::span<const double> grad, double lr);
};

struct Transition {
  std::vector<double> observation;
  int action = 0;
  double log_prob = 0.0;
  double reward = 0.0;
  double value = 0.0;
  bool done = false;
};

/// Per-worker trajectories collected under one frozen policy.
struct Rollout {
  std::vector<std::vector<Transition>> per_worker;
  std::vector<double> bootstrap;  // V(s_T) for each worker

  explicit Rollout(int workers = 0) : per_worker(workers), bootstrap(workers, 0.0) {}
  std::size_t size() const;
  void clear();
};

struct UpdateStats {
  double actor_loss = 0.0;
  double critic_loss = 0.0;
  double entropy = 0.0;
  double clip_frac = 0.0;
  double mean_kl = 0.0;
  int minibatches = 0;
};

/// `epochs` passes of shuffled minibatch descent on ppo_loss over the rollout.
/// Requires rollout.size() == rollout_steps * workers; clears the rollout.
UpdateStats ppo_update(PolicyParams& params, Adam& opt, Rollout& rollout, const PpoConfig& cfg, Rng& rng);

}  // namespace vat
