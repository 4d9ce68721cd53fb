// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "support.hpp"
#include "vat/curriculum.hpp"
#include "vat/eval.hpp"
#include "vat/reward.hpp"

using namespace vat;

namespace {

// Tolerances and budgets.
constexpr double kOracleTol = 1e-9;
constexpr double kBoundaryTol = 1e-9;
constexpr double kCenterRewardTol = 1e-6;
constexpr double kLevelPhiTol = 1e-6;
constexpr double kLevelRewardTol = 1e-4;
constexpr double kMisalignedFraction = 0.01;
constexpr double kGradTol = 1e-4;
constexpr double kGaeTol = 1e-12;  // exact up to summation order
constexpr double kBanditTarget = 0.95;
constexpr double kTsrTarget = 0.6;
constexpr double kRewardGap = 0.2;
constexpr double kCurriculumSlack = 0.02;
// Uniform-random policy, phase 2, default protocol, evaluation seed 99.
constexpr double kRandomFloor = 0.038;
constexpr double kRandomFloorTol = 0.005;

constexpr std::uint64_t kEvalSeed = 99;
constexpr std::int64_t kTrainSteps = 1'000'000;
constexpr double kTrainLearningRate = 1e-3;
constexpr double kTrainBudgetSeconds = 15 * 60;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;
std::ofstream report_file;

void emit(const std::string& line) {
  std::cout << line << std::endl;
  if (report_file) report_file << line << std::endl;
}

void report(int id, bool ok, const std::string& what) {
  if (!ok) ++failures;
  emit(std::string(ok ? "PASS" : "FAIL") + " criterion " + std::to_string(id) + ": " + what);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

RewardView view_at(const PoseSample& pose, const EpisodeConfig& cfg) {
  DroneState d;
  d.position = Vec3(0, 0, cfg.ground_height + pose.altitude);
  d.yaw = pose.yaw;
  d.gimbal_pitch = pose.pitch;
  const auto ground = plane_in_frame(PlaneCoeffs::ground(cfg.ground_height), camera_pose(d).inverse());
  return make_reward_view(cfg.camera, ground, cfg.reward);
}

void criterion1() {
  const auto t0 = Clock::now();
  const auto rep = geometry_oracle_check(10000, 101, EpisodeConfig{}, kOracleTol);
  const double s = seconds_since(t0);
  report(1, rep.passed() && rep.poses == 10000 && s < 5.0,
         fmt("%d/%d poses within relative error 1e-9 (max %.2e), %.3f s", rep.within, rep.poses,
             rep.max_rel_error, s));
}

void criterion2() {
  const auto t0 = Clock::now();
  const EpisodeConfig cfg;
  const auto poses = sample_poses(1000, cfg, 202);
  Rng rng(203);
  double center_max = 0.0, boundary_err = 0.0;
  int non_increasing = 0;
  for (const auto& pose : poses) {
    const auto q = view_at(pose, cfg).full;
    center_max = std::max(center_max, deviation(q.cg, q).phi);

    const auto b = q.boundary();
    const auto e = static_cast<std::size_t>(rng.uniform_int(0, 3));
    const Vec3 pb = b[e] + rng.uniform() * (b[(e + 1) % 4] - b[e]);
    boundary_err = std::max(boundary_err, std::abs(deviation(pb, q).phi - 1.0));

    // Ray from cg towards a random in-plane direction, sampled out past the boundary.
    const Vec3 toward = QuadSampler(q)(rng);
    if ((toward - q.cg).norm() < 1e-9) continue;
    const Vec3 dir = (toward - q.cg).normalized();
    double prev = 0.0;
    std::vector<double> ts(50);
    for (double& t : ts) t = rng.uniform(1e-3, 1.5 * max_offset_distance(q));
    std::sort(ts.begin(), ts.end());
    for (double t : ts) {
      const double phi = deviation(q.cg + t * dir, q).phi;
      if (!(phi > prev)) ++non_increasing;
      prev = phi;
    }
  }
  const double s = seconds_since(t0);
  report(2, center_max == 0.0 && boundary_err <= kBoundaryTol && non_increasing == 0 && s < 5.0,
         fmt("phi(center) max %g; 1000 boundary points max |phi-1| %.2e; 1000 rays, %d non-increasing steps; %.2f s",
             center_max, boundary_err, non_increasing, s));
}

void criterion3() {
  const EpisodeConfig cfg;
  const auto poses = sample_poses(100, cfg, 302);
  Rng rng(303);
  long pairs = 0, violations = 0;
  double center_err = 0.0;
  for (const auto& pose : poses) {
    const auto view = view_at(pose, cfg);
    center_err = std::max(center_err, std::abs(goal_centered_reward(view.full.cg, view, cfg.reward) - std::tanh(4.0)));
    const QuadSampler clip(view.clip);
    for (int i = 0; i < 1000; ++i) {
      const Vec3 p1 = clip(rng), p2 = clip(rng);
      // Half-plane gauge as an independent route to phi.
      const double f1 = quad_gauge(p1, view.full), f2 = quad_gauge(p2, view.full);
      const double r1 = goal_centered_reward(p1, view, cfg.reward), r2 = goal_centered_reward(p2, view, cfg.reward);
      ++pairs;
      if ((f1 < f2 && !(r1 > r2)) || (f2 < f1 && !(r2 > r1))) ++violations;
    }
  }
  report(3, pairs == 100000 && violations == 0 && center_err <= kCenterRewardTol,
         fmt("%ld in-clip pairs, %ld ordering violations; |r_gc(center) - tanh(4)| = %.2e", pairs, violations,
             center_err));
}

void criterion4() {
  const auto t0 = Clock::now();
  const EpisodeConfig cfg;
  const auto rep = verify_proposition(100, 10000, 401, cfg);
  const auto poses = sample_poses(100, cfg, 401);
  int opposite = 0;
  for (const auto& row : rep.rows) {
    if (!row.found) continue;
    const auto q = pose_projection(row.pose, cfg.camera, cfg.ground_height);
    const double c = max_offset_distance(q);
    const double r1 = std::max(0.0, 1.0 - row.d1 / c), r2 = std::max(0.0, 1.0 - row.d2 / c);
    if (row.phi1 < row.phi2 && r1 < r2) ++opposite;
  }
  const double s = seconds_since(t0);
  report(4, rep.found() == 100 && opposite == 100 && s < 30.0,
         fmt("counterexample on %d/100 poses, distance reward ordered opposite to phi on %d; %.2f s", rep.found(),
             opposite, s));
}

struct LevelCount {
  long pairs = 0, violations = 0;
};

LevelCount level_pairs(const ContourGrid& phi_grid, const ContourGrid& reward_grid) {
  std::vector<std::size_t> cells;
  for (std::size_t k = 0; k < phi_grid.phi.size(); ++k) {
    if (phi_grid.in_clip[k]) cells.push_back(k);
  }
  std::sort(cells.begin(), cells.end(), [&](auto a, auto b) { return phi_grid.phi[a] < phi_grid.phi[b]; });
  LevelCount n;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    for (std::size_t j = i + 1; j < cells.size(); ++j) {
      if (phi_grid.phi[cells[j]] - phi_grid.phi[cells[i]] >= kLevelPhiTol) break;
      ++n.pairs;
      if (std::abs(reward_grid.values[cells[j]] - reward_grid.values[cells[i]]) >= kLevelRewardTol) ++n.violations;
    }
  }
  return n;
}

void criterion5() {
  const EpisodeConfig cfg;
  const auto view = view_at(PoseSample{1.0, 17.0, 0.0}, cfg);
  const auto gc = contour_grid(view, Field::goal_centered, 201, 201, cfg.reward);
  const auto dist = contour_grid(view, Field::distance, 201, 201, cfg.reward);
  const auto a = level_pairs(gc, gc);
  const auto b = level_pairs(gc, dist);
  const double frac = b.pairs ? static_cast<double>(b.violations) / b.pairs : 0.0;
  report(5, a.pairs > 0 && a.violations == 0 && frac >= kMisalignedFraction,
         fmt("201x201 grid: %ld in-clip pairs with |dphi| < 1e-6; goal-centered violations %ld; distance "
             "violations %ld (%.1f%%)",
             a.pairs, a.violations, b.violations, 100.0 * frac));
}

void criterion6() {
  const auto t0 = Clock::now();
  Rng rng(601);
  PpoConfig cfg;
  double worst_grad = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    auto p = PolicyParams::make(6, kNumActions, {16, 16}, rng);
    const Batch b = testing::random_batch(p, 16, rng, 0.15);
    worst_grad = std::max(worst_grad, testing::gradient_gap(p, b, cfg));
  }

  double worst_gae = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 64;
    std::vector<double> r(n), v(n);
    std::vector<std::uint8_t> d(n);
    for (std::size_t t = 0; t < n; ++t) {
      r[t] = rng.normal();
      v[t] = rng.normal();
      d[t] = rng.uniform() < 0.1;
    }
    const double boot = rng.normal(), gamma = rng.uniform(0.5, 1.0), lambda = rng.uniform(0.0, 1.0);
    const auto g = gae_advantages(r, v, d, boot, gamma, lambda);
    const auto o = testing::gae_oracle(r, v, d, boot, gamma, lambda);
    for (std::size_t t = 0; t < n; ++t) worst_gae = std::max(worst_gae, std::abs(g.advantages[t] - o[t]));
  }

  int converged = 0;
  std::string probs;
  for (std::uint64_t seed : {1, 2, 3}) {
    const double p0 = testing::bandit_p0(testing::train_bandit(seed, 200).params);
    converged += p0 > kBanditTarget;
    probs += fmt(" %.4f", p0);
  }
  const double s = seconds_since(t0);
  report(6, worst_grad < kGradTol && worst_gae <= kGaeTol && converged == 3 && s < 120.0,
         fmt("20 batches worst grad rel err %.2e; 100 GAE sequences max err %.1e; bandit P(opt)%s (%d/3); %.1f s",
             worst_grad, worst_gae, probs.c_str(), converged, s));
}

PpoConfig training_ppo() {
  PpoConfig p;
  p.learning_rate = kTrainLearningRate;
  return p;
}

double train_and_eval(RewardKind kind, bool curriculum, std::uint64_t seed) {
  const EpisodeConfig env;
  CurriculumConfig cur;
  cur.total_steps = kTrainSteps;
  cur.enabled = curriculum;
  const auto t0 = Clock::now();
  const auto res = curriculum_train([&](int) { return std::make_unique<TrackingTask>(env, kind); }, training_ppo(),
                                    cur, env.reward.alpha, seed);
  EpisodeConfig eval_env = env;
  eval_env.phase = 2;
  const double tsr = run_protocol(res.params, eval_env, EvalProtocol{}, kEvalSeed).tsr_mean;
  emit("  " + std::string(reward_kind_name(kind)) + (curriculum ? " curriculum" : " no-curriculum") + " seed " +
       std::to_string(seed) + ": TSR " + fmt("%.3f", tsr) + ", switch " +
       (res.switch_step ? std::to_string(*res.switch_step) : std::string(curriculum ? "none" : "-")) +
       fmt(", %.0f s", seconds_since(t0)));
  return tsr;
}

void criterion7() {
  const auto t0 = Clock::now();
  const std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::vector<double> gc, dist, nocur;
  for (auto s : seeds) {
    gc.push_back(train_and_eval(RewardKind::goal_centered, true, s));
    dist.push_back(train_and_eval(RewardKind::distance, true, s));
    nocur.push_back(train_and_eval(RewardKind::goal_centered, false, s));
  }
  EpisodeConfig eval_env;
  eval_env.phase = 2;
  const double random_tsr =
      run_protocol(random_policy(derive_seed(kEvalSeed, "random-policy", 0)), eval_env, EvalProtocol{}, kEvalSeed)
          .tsr_mean;
  const double s = seconds_since(t0);

  auto mean = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); };
  const double m_gc = mean(gc), m_dist = mean(dist), m_nocur = mean(nocur);
  bool per_seed = true;
  for (std::size_t i = 0; i < seeds.size(); ++i) per_seed = per_seed && gc[i] >= nocur[i] - kCurriculumSlack;
  const double worst = std::min({*std::min_element(gc.begin(), gc.end()), *std::min_element(dist.begin(), dist.end()),
                                 *std::min_element(nocur.begin(), nocur.end())});
  const bool a = m_gc >= kTsrTarget && m_gc - m_dist >= kRewardGap;
  const bool b = per_seed && m_gc > m_nocur;
  const bool c = worst > kRandomFloor && std::abs(random_tsr - kRandomFloor) <= kRandomFloorTol;
  report(7, a && b && c && s <= kTrainBudgetSeconds,
         fmt("mean TSR goal-centered %.3f, distance %.3f (gap %.3f), no-curriculum %.3f; per-seed curriculum >= "
             "no-curriculum - %.2f: %s; random %.3f vs pinned floor %.3f; (a) %s (b) %s (c) %s; %.0f s",
             m_gc, m_dist, m_gc - m_dist, m_nocur, kCurriculumSlack, per_seed ? "yes" : "no", random_tsr,
             kRandomFloor, a ? "ok" : "no", b ? "ok" : "no", c ? "ok" : "no", s));
}

void criterion8() {
  EpisodeConfig cfg;
  cfg.phase = 2;
  const EvalProtocol protocol;
  const auto res = run_protocol(random_policy(801), cfg, protocol, kEvalSeed, true);

  const std::vector<double> angles = {0.0, std::numbers::pi / 2, std::numbers::pi, 3 * std::numbers::pi / 2};
  bool angles_ok = res.per_angle.size() == 4;
  for (std::size_t i = 0; angles_ok && i < 4; ++i) {
    angles_ok = res.per_angle[i].angle == angles[i] && res.per_angle[i].episodes == 10;
  }

  // Recompute every episode's TSR from the exported trace CSV.
  std::stringstream csv;
  write_traces_csv(csv, res);
  std::string line;
  std::getline(csv, line);
  std::vector<int> hits(res.episodes.size(), 0);
  while (std::getline(csv, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    hits.at(std::stoul(cols[0])) += std::stoi(cols[10]);  // column 0 indexes the episode list
  }
  int identical = 0;
  std::vector<double> tsr;
  for (std::size_t k = 0; k < res.episodes.size(); ++k) {
    const double t = static_cast<double>(hits[k]) / protocol.e_ml;
    identical += t == res.episodes[k].tsr;
    tsr.push_back(t);
  }
  double m = 0.0, v = 0.0;
  for (double t : tsr) m += t;
  m /= tsr.size();
  for (double t : tsr) v += (t - m) * (t - m);
  const double sd = std::sqrt(v / (tsr.size() - 1));
  const bool stats_ok = std::abs(m - res.tsr_mean) < 1e-12 && std::abs(sd - res.tsr_std) < 1e-12;
  report(8, res.episode_count() == 40 && angles_ok && identical == 40 && stats_ok,
         fmt("%d episodes over angles {0, pi/2, pi, 3pi/2}; TSR %.3f +- %.3f; %d/40 episode TSRs recomputed "
             "identically from traces",
             res.episode_count(), res.tsr_mean, res.tsr_std, identical));
}

}  // namespace

int main(int argc, char** argv) {
  // `--skip-training` leaves criterion 7 out (reported as FAIL, not run);
  // `--report PATH` also writes the lines to a file.
  bool skip_training = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--skip-training") skip_training = true;
    else if (a == "--report" && i + 1 < argc) report_file.open(argv[++i]);
    else {
      std::cerr << "usage: acceptance [--skip-training] [--report PATH]\n";
      return 2;
    }
  }
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  if (skip_training) report(7, false, "skipped");
  else criterion7();
  criterion8();
  emit(std::string(failures ? "ACCEPTANCE FAILED" : "ACCEPTANCE PASSED") + " (" + std::to_string(8 - failures) + "/8)");
  return failures ? 1 : 0;
}
