#include "vat/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "vat/errors.hpp"

namespace vat {

void PpoConfig::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("PpoConfig: gamma must lie in (0, 1]");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
    throw std::invalid_argument("PpoConfig: gae_lambda must lie in [0, 1]");
  }
  if (!(clip_eps > 0.0)) throw std::invalid_argument("PpoConfig: clip_eps must be positive");
  if (!(entropy_beta >= 0.0) || !(value_coef >= 0.0)) {
    throw std::invalid_argument("PpoConfig: loss coefficients must be non-negative");
  }
  if (rollout_steps <= 0 || minibatch <= 0 || epochs <= 0 || workers <= 0) {
    throw std::invalid_argument("PpoConfig: rollout_steps, minibatch, epochs and workers must be positive");
  }
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("PpoConfig: learning_rate must be non-negative");
  if (!(max_grad_norm >= 0.0)) throw std::invalid_argument("PpoConfig: max_grad_norm must be non-negative");
  if (hidden.empty()) throw std::invalid_argument("PpoConfig: at least one hidden layer is required");
}

PolicyParams PolicyParams::make(int obs_dim, int n_actions, const std::vector<int>& hidden, Rng& rng) {
  PolicyParams p;
  p.actor = MlpShape(obs_dim, hidden, n_actions);
  p.critic = MlpShape(obs_dim, hidden, 1);
  p.flat.assign(p.actor.param_count() + p.critic.param_count(), 0.0);
  std::span<double> all(p.flat);
  p.actor.init(all.first(p.actor.param_count()), rng, 1.0, 0.01);
  p.critic.init(all.subspan(p.actor.param_count()), rng, 1.0, 1.0);
  return p;
}

Matrix log_softmax(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    const double lse = mx + std::log((logits.row(i).array() - mx).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

Matrix PolicyParams::log_probs(const Matrix& obs) const {
  return log_softmax(actor.forward(actor_params(), obs));
}

Eigen::VectorXd PolicyParams::values(const Matrix& obs) const {
  return critic.forward(critic_params(), obs).col(0);
}

int PolicyParams::greedy_action(std::span<const double> obs) const {
  Matrix x(1, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t k = 0; k < obs.size(); ++k) x(0, static_cast<Eigen::Index>(k)) = obs[k];
  Eigen::Index best = 0;
  actor.forward(actor_params(), x).row(0).maxCoeff(&best);
  return static_cast<int>(best);
}

GaeResult gae_advantages(std::span<const double> rewards, std::span<const double> values,
                         std::span<const std::uint8_t> dones, double bootstrap, double gamma,
                         double lambda) {
  const std::size_t n = rewards.size();
  if (values.size() != n || dones.size() != n) {
    throw std::invalid_argument("gae_advantages: rewards, values and dones must have equal length");
  }
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double running = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    const bool terminal = dones[t] != 0;
    const double next_value = terminal ? 0.0 : (t + 1 < n ? values[t + 1] : bootstrap);
    const double delta = rewards[t] + gamma * next_value - values[t];
    running = delta + (terminal ? 0.0 : gamma * lambda * running);
    out.advantages[t] = running;
    out.returns[t] = running + values[t];
  }
  return out;
}

LossResult ppo_loss(const PolicyParams& params, const Batch& batch, const PpoConfig& cfg) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  if (n == 0) throw std::invalid_argument("ppo_loss: empty batch");
  if (batch.obs.rows() != n) throw std::invalid_argument("ppo_loss: batch rows mismatch");

  MlpShape::Cache actor_cache, critic_cache;
  const Matrix logits = params.actor.forward(params.actor_params(), batch.obs, &actor_cache);
  const Matrix values = params.critic.forward(params.critic_params(), batch.obs, &critic_cache);
  const Matrix logp = log_softmax(logits);
  const Matrix probs = logp.array().exp().matrix();

  const double inv_n = 1.0 / static_cast<double>(n);
  Matrix d_logits = Matrix::Zero(n, logits.cols());
  Matrix d_values(n, 1);

  double surrogate = 0.0, entropy = 0.0, critic = 0.0, clipped = 0.0, kl = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int a = batch.actions[static_cast<std::size_t>(i)];
    const double adv = batch.advantages[i];
    const double log_ratio = logp(i, a) - batch.old_log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double clipped_ratio = std::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
    const double plain = ratio * adv;
    const double bounded = clipped_ratio * adv;
    // Gradient flows through the unclipped branch only when it is the minimum.
    const bool use_plain = plain <= bounded;
    surrogate += use_plain ? plain : bounded;
    if (std::abs(ratio - 1.0) > cfg.clip_eps) clipped += 1.0;
    kl += (ratio - 1.0) - log_ratio;

    double h = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) h -= probs(i, j) * logp(i, j);
    entropy += h;

    const double g = use_plain ? plain : 0.0;  // d surrogate / d log pi(a|s)
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const double indicator = j == a ? 1.0 : 0.0;
      const double d_surr = g * (indicator - probs(i, j));
      const double d_ent = -probs(i, j) * (logp(i, j) + h);
      d_logits(i, j) = (-d_surr - cfg.entropy_beta * d_ent) * inv_n;
    }

    const double err = batch.returns[i] - values(i, 0);
    critic += err * err;
    d_values(i, 0) = -2.0 * cfg.value_coef * err * inv_n;
  }

  LossResult out;
  out.entropy = entropy * inv_n;
  out.actor = -surrogate * inv_n - cfg.entropy_beta * out.entropy;
  out.critic = critic * inv_n;
  out.total = out.actor + cfg.value_coef * out.critic;
  out.clip_frac = clipped * inv_n;
  out.approx_kl = kl * inv_n;
  if (!std::isfinite(out.total)) {
    std::ostringstream msg;
    msg << "ppo_loss: non-finite loss (actor " << out.actor << ", critic " << out.critic
        << ", entropy " << out.entropy << ", kl " << out.approx_kl << ")";
    throw NonFiniteLoss(msg.str());
  }

  out.grad.assign(params.flat.size(), 0.0);
  std::span<double> grad(out.grad);
  params.actor.backward(params.actor_params(), actor_cache, d_logits,
                        grad.first(params.actor.param_count()));
  params.critic.backward(params.critic_params(), critic_cache, d_values,
                         grad.subspan(params.actor.param_count()));
  return out;
}

void Adam::step(std::span<double> params, std::span<const double> grad, double lr) {
  if (m.size() != params.size()) {
    m.assign(params.size(), 0.0);
    v.assign(params.size(), 0.0);
    steps = 0;
  }
  ++steps;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(steps));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(steps));
  for (std::size_t k = 0; k < params.size(); ++k) {
    m[k] = beta1 * m[k] + (1.0 - beta1) * grad[k];
    v[k] = beta2 * v[k] + (1.0 - beta2) * grad[k] * grad[k];
    params[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps);
  }
}

std::size_t Rollout::size() const {
  std::size_t n = 0;
  for (const auto& w : per_worker) n += w.size();
  return n;
}

void Rollout::clear() {
  for (auto& w : per_worker) w.clear();
  std::fill(bootstrap.begin(), bootstrap.end(), 0.0);
}

UpdateStats ppo_update(PolicyParams& params, Adam& opt, Rollout& rollout, const PpoConfig& cfg, Rng& rng) {
  const std::size_t expected = static_cast<std::size_t>(cfg.rollout_steps) * cfg.workers;
  if (rollout.size() != expected || rollout.per_worker.size() != static_cast<std::size_t>(cfg.workers)) {
    throw std::invalid_argument("ppo_update: rollout must hold rollout_steps x workers transitions");
  }

  const int dim = params.obs_dim();
  Batch all;
  all.obs.resize(static_cast<Eigen::Index>(expected), dim);
  all.actions.resize(expected);
  all.old_log_probs.resize(static_cast<Eigen::Index>(expected));
  all.advantages.resize(static_cast<Eigen::Index>(expected));
  all.returns.resize(static_cast<Eigen::Index>(expected));

  Eigen::Index row = 0;
  for (std::size_t w = 0; w < rollout.per_worker.size(); ++w) {
    const auto& traj = rollout.per_worker[w];
    std::vector<double> rewards, values;
    std::vector<std::uint8_t> dones;
    for (const auto& t : traj) {
      rewards.push_back(t.reward);
      values.push_back(t.value);
      dones.push_back(t.done ? 1 : 0);
    }
    const GaeResult gae = gae_advantages(rewards, values, dones, rollout.bootstrap[w], cfg.gamma, cfg.gae_lambda);
    for (std::size_t t = 0; t < traj.size(); ++t, ++row) {
      for (int k = 0; k < dim; ++k) all.obs(row, k) = traj[t].observation[static_cast<std::size_t>(k)];
      all.actions[static_cast<std::size_t>(row)] = traj[t].action;
      all.old_log_probs[row] = traj[t].log_prob;
      all.advantages[row] = gae.advantages[t];
      all.returns[row] = gae.returns[t];
    }
  }
  rollout.clear();

  const double mean = all.advantages.mean();
  const double var = (all.advantages.array() - mean).square().mean();
  all.advantages = ((all.advantages.array() - mean) / (std::sqrt(var) + 1e-8)).matrix();

  std::vector<std::size_t> order(expected);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t mb = std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatch), expected);

  UpdateStats stats;
  Batch batch;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Fisher-Yates with the portable generator.
    for (std::size_t i = expected; i > 1; --i) {
      std::swap(order[i - 1], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);
    }
    for (std::size_t start = 0; start < expected; start += mb) {
      const std::size_t count = std::min(mb, expected - start);
      batch.obs.resize(static_cast<Eigen::Index>(count), dim);
      batch.actions.resize(count);
      batch.old_log_probs.resize(static_cast<Eigen::Index>(count));
      batch.advantages.resize(static_cast<Eigen::Index>(count));
      batch.returns.resize(static_cast<Eigen::Index>(count));
      for (std::size_t k = 0; k < count; ++k) {
        const auto src = static_cast<Eigen::Index>(order[start + k]);
        const auto dst = static_cast<Eigen::Index>(k);
        batch.obs.row(dst) = all.obs.row(src);
        batch.actions[k] = all.actions[static_cast<std::size_t>(src)];
        batch.old_log_probs[dst] = all.old_log_probs[src];
        batch.advantages[dst] = all.advantages[src];
        batch.returns[dst] = all.returns[src];
      }

      LossResult loss = ppo_loss(params, batch, cfg);
      if (cfg.max_grad_norm > 0.0) {
        double sq = 0.0;
        for (double g : loss.grad) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > cfg.max_grad_norm) {
          const double scale = cfg.max_grad_norm / norm;
          for (double& g : loss.grad) g *= scale;
        }
      }
      opt.step(params.flat, loss.grad, cfg.learning_rate);

      stats.actor_loss += loss.actor;
      stats.critic_loss += loss.critic;
      stats.entropy += loss.entropy;
      stats.clip_frac += loss.clip_frac;
      stats.mean_kl += loss.approx_kl;
      ++stats.minibatches;
    }
  }
  if (stats.minibatches > 0) {
    const double inv = 1.0 / stats.minibatches;
    stats.actor_loss *= inv;
    stats.critic_loss *= inv;
    stats.entropy *= inv;
    stats.clip_frac *= inv;
    stats.mean_kl *= inv;
  }
  return stats;
}

}  // namespace vat
