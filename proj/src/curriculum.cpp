#include "vat/curriculum.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>

namespace vat {

RewardKind parse_reward_kind(std::string_view s) {
  if (s == "goal-centered" || s == "goal_centered") return RewardKind::goal_centered;
  if (s == "distance") return RewardKind::distance;
  throw std::invalid_argument("unknown reward kind '" + std::string(s) + "' (expected goal-centered or distance)");
}

std::string_view reward_kind_name(RewardKind k) {
  return k == RewardKind::goal_centered ? "goal-centered" : "distance";
}

StepOutcome TrackingTask::step(int action) {
  if (action < 0 || action >= kNumActions) throw std::out_of_range("TrackingTask: action out of range");
  const StepResult r = env_.step(static_cast<Action>(action));
  StepOutcome out;
  out.r_gc = r.r_gc;
  out.r_dt = r.r_dt;
  out.done = r.done;
  out.reward = kind_ == RewardKind::goal_centered ? r.r_gc : r.info.r_distance;
  return out;
}

void CurriculumConfig::validate(double alpha) const {
  if (!(eta >= 0.0 && eta < std::tanh(alpha))) {
    throw std::invalid_argument("CurriculumConfig: eta must lie in [0, tanh(alpha))");
  }
  if (window <= 0) throw std::invalid_argument("CurriculumConfig: window must be positive");
  if (total_steps < 0) throw std::invalid_argument("CurriculumConfig: total_steps must be non-negative");
}

namespace {

/// Fixed-capacity running mean over the most recent values.
class WindowMean {
 public:
  explicit WindowMean(std::size_t capacity) : buf_(capacity, 0.0) {}

  void push(double v) {
    if (count_ == buf_.size()) sum_ -= buf_[head_];
    else ++count_;
    buf_[head_] = v;
    sum_ += v;
    head_ = (head_ + 1) % buf_.size();
    // Resum once per lap so round-off from the running update cannot accumulate.
    if (head_ == 0) {
      sum_ = 0.0;
      for (double x : buf_) sum_ += x;
    }
  }
  bool full() const { return count_ == buf_.size(); }
  double mean() const { return count_ ? sum_ / static_cast<double>(count_) : 0.0; }
  void clear() {
    count_ = head_ = 0;
    sum_ = 0.0;
  }

 private:
  std::vector<double> buf_;
  std::size_t count_ = 0, head_ = 0;
  double sum_ = 0.0;
};

}  // namespace

TrainResult curriculum_train(const EnvFactory& factory, const PpoConfig& ppo, const CurriculumConfig& cur,
                             double alpha, std::uint64_t seed, const std::function<void(const LogRow&)>& on_update) {
  ppo.validate();
  cur.validate(alpha);
  const int workers = ppo.workers;

  std::vector<std::unique_ptr<Environment>> envs;
  for (int w = 0; w < workers; ++w) {
    envs.push_back(factory(w));
    if (!envs.back()) throw std::invalid_argument("curriculum_train: factory returned null");
  }
  const int obs_dim = envs.front()->observation_size();
  const int n_actions = envs.front()->action_count();

  Rng init_rng(derive_seed(seed, "init", 0));
  Rng action_rng(derive_seed(seed, "actions", 0));
  Rng update_rng(derive_seed(seed, "minibatch", 0));
  std::vector<Rng> episode_rngs;
  for (int w = 0; w < workers; ++w) episode_rngs.emplace_back(derive_seed(seed, "episodes", static_cast<std::uint64_t>(w)));

  TrainResult result{PolicyParams::make(obs_dim, n_actions, ppo.hidden, init_rng), {}, std::nullopt, 0};
  PolicyParams& params = result.params;
  Adam opt;

  int phase = cur.enabled ? 1 : 2;
  Matrix obs(workers, obs_dim);
  auto reset_all = [&] {
    for (int w = 0; w < workers; ++w) {
      envs[w]->set_phase(phase);
      const auto& o = envs[w]->reset(episode_rngs[w].next_u64());
      for (int k = 0; k < obs_dim; ++k) obs(w, k) = o[static_cast<std::size_t>(k)];
    }
  };
  reset_all();

  Rollout rollout(workers);
  WindowMean window(static_cast<std::size_t>(cur.window));
  double sum_gc = 0.0, sum_dt = 0.0;
  int collected = 0;  // lockstep steps in the current rollout
  std::vector<double> probs(static_cast<std::size_t>(n_actions));

  while (result.steps < cur.total_steps) {
    const Matrix logp = params.log_probs(obs);
    const Eigen::VectorXd values = params.values(obs);
    for (int w = 0; w < workers; ++w) {
      for (int j = 0; j < n_actions; ++j) probs[static_cast<std::size_t>(j)] = std::exp(logp(w, j));
      const int a = static_cast<int>(action_rng.categorical(probs));
      Transition t;
      t.observation.resize(static_cast<std::size_t>(obs_dim));
      for (int k = 0; k < obs_dim; ++k) t.observation[static_cast<std::size_t>(k)] = obs(w, k);
      t.action = a;
      t.log_prob = logp(w, a);
      t.value = values[w];

      const StepOutcome s = envs[w]->step(a);
      t.reward = s.reward;
      t.done = s.done;
      rollout.per_worker[static_cast<std::size_t>(w)].push_back(std::move(t));
      sum_gc += s.r_gc;
      sum_dt += s.r_dt;
      if (phase == 1) window.push(s.r_gc);

      const auto& o = s.done ? envs[w]->reset(episode_rngs[w].next_u64()) : envs[w]->observation();
      for (int k = 0; k < obs_dim; ++k) obs(w, k) = o[static_cast<std::size_t>(k)];
    }
    result.steps += workers;
    ++collected;

    if (phase == 1 && window.full() && window.mean() >= cur.eta) {
      phase = 2;
      result.switch_step = result.steps;
      rollout.clear();
      window.clear();
      sum_gc = sum_dt = 0.0;
      collected = 0;
      reset_all();
      continue;
    }

    if (collected == ppo.rollout_steps) {
      const Eigen::VectorXd boot = params.values(obs);
      for (int w = 0; w < workers; ++w) rollout.bootstrap[static_cast<std::size_t>(w)] = boot[w];
      const UpdateStats st = ppo_update(params, opt, rollout, ppo, update_rng);
      const double n = static_cast<double>(collected) * workers;
      LogRow row{result.steps, phase, sum_gc / n, sum_dt / n, st.actor_loss, st.critic_loss, st.entropy, st.clip_frac};
      result.log.push_back(row);
      if (on_update) on_update(row);
      sum_gc = sum_dt = 0.0;
      collected = 0;
    }
  }
  return result;
}

void write_log_csv(std::ostream& out, const std::vector<LogRow>& log) {
  const auto old_precision = out.precision(17);
  out << "step,phase,mean_reward,tsr_estimate,actor_loss,critic_loss,entropy,clip_frac\n";
  for (const auto& r : log) {
    out << r.step << ',' << r.phase << ',' << r.mean_reward << ',' << r.tsr_estimate << ',' << r.actor_loss << ','
        << r.critic_loss << ',' << r.entropy << ',' << r.clip_frac << '\n';
  }
  out.precision(old_precision);
}

}  // namespace vat
