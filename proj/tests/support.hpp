#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vat/curriculum.hpp"

namespace vat::testing {

/// One state, one-step episodes; action 0 pays 1, everything else 0.
class BanditEnv final : public Environment {
 public:
  int observation_size() const override { return 1; }
  int action_count() const override { return kNumActions; }
  const std::vector<double>& reset(std::uint64_t) override { return obs_; }
  const std::vector<double>& observation() const override { return obs_; }
  StepOutcome step(int action) override {
    StepOutcome s;
    s.reward = action == 0 ? 1.0 : 0.0;
    s.r_gc = s.reward;
    s.r_dt = action == 0;
    s.done = true;
    return s;
  }
  void set_phase(int phase) override { phase_ = phase; }
  int phase() const { return phase_; }

 private:
  std::vector<double> obs_{1.0};
  int phase_ = 1;
};

// Direct double sum over l, stopping after the first terminal transition.
inline std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                                      const std::vector<std::uint8_t>& d, double boot, double gamma,
                                      double lambda) {
  const std::size_t n = r.size();
  std::vector<double> delta(n);
  for (std::size_t t = 0; t < n; ++t) {
    const double next = d[t] ? 0.0 : (t + 1 < n ? v[t + 1] : boot);
    delta[t] = r[t] + gamma * next - v[t];
  }
  std::vector<double> adv(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      adv[t] += w * delta[k];
      if (d[k]) break;
      w *= gamma * lambda;
    }
  }
  return adv;
}

inline Batch random_batch(const PolicyParams& p, int n, Rng& rng, double ratio_noise) {
  Batch b;
  b.obs.resize(n, p.obs_dim());
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < p.obs_dim(); ++k) b.obs(i, k) = rng.normal();
  }
  const Matrix logp = p.log_probs(b.obs);
  b.old_log_probs.resize(n);
  b.advantages.resize(n);
  b.returns.resize(n);
  for (int i = 0; i < n; ++i) {
    const int a = static_cast<int>(rng.uniform_int(0, p.n_actions() - 1));
    b.actions.push_back(a);
    b.old_log_probs[i] = logp(i, a) + ratio_noise * rng.normal();
    b.advantages[i] = rng.normal();
    b.returns[i] = rng.normal();
  }
  return b;
}

/// Worst per-component relative gap between the analytic loss gradient and
/// central differences (floor 1e-6 on the scale).
inline double gradient_gap(PolicyParams& p, const Batch& b, const PpoConfig& cfg, double h = 1e-5) {
  const auto l = ppo_loss(p, b, cfg);
  double worst = 0.0;
  for (std::size_t k = 0; k < p.flat.size(); ++k) {
    const double x = p.flat[k];
    p.flat[k] = x + h;
    const double up = ppo_loss(p, b, cfg).total;
    p.flat[k] = x - h;
    const double down = ppo_loss(p, b, cfg).total;
    p.flat[k] = x;
    const double fd = (up - down) / (2 * h);
    worst = std::max(worst, std::abs(fd - l.grad[k]) / std::max({std::abs(fd), std::abs(l.grad[k]), 1e-6}));
  }
  return worst;
}

inline PpoConfig bandit_ppo() {
  PpoConfig cfg;
  cfg.workers = 1;
  cfg.rollout_steps = 64;
  cfg.minibatch = 64;
  cfg.epochs = 4;
  cfg.learning_rate = 1e-3;
  cfg.hidden = {16, 16};
  return cfg;
}

inline TrainResult train_bandit(std::uint64_t seed, int updates) {
  const PpoConfig ppo = bandit_ppo();
  CurriculumConfig cur;
  cur.enabled = false;
  cur.total_steps = static_cast<std::int64_t>(updates) * ppo.rollout_steps * ppo.workers;
  return curriculum_train([](int) { return std::make_unique<BanditEnv>(); }, ppo, cur, 4.0, seed);
}

inline double bandit_p0(const PolicyParams& params) {
  Matrix x(1, 1);
  x(0, 0) = 1.0;
  return std::exp(params.log_probs(x)(0, 0));
}

}  // namespace vat::testing
