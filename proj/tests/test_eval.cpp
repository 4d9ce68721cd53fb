#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "vat/eval.hpp"

using namespace vat;

namespace {

EvalProtocol small_protocol(int episodes = 3, int e_ml = 1500) {
  EvalProtocol p;
  p.episodes_per_angle = episodes;
  p.e_ml = e_ml;
  return p;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

double sample_std(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1));
}

}  // namespace

TEST_CASE("protocol validation") {
  EvalProtocol p;
  CHECK_NOTHROW(p.validate());
  p.angles = {0.0, 0.0};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.angles = {7.0};
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = EvalProtocol{};
  p.episodes_per_angle = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = EvalProtocol{};
  p.e_ml = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}

TEST_CASE("protocol runs every angle and aggregates with n - 1") {
  EpisodeConfig cfg;
  cfg.phase = 2;
  const EvalProtocol p = small_protocol(10, 300);
  const auto res = run_protocol(random_policy(5), cfg, p, 11);
  REQUIRE(res.episode_count() == 40);
  REQUIRE(res.per_angle.size() == 4);
  for (std::size_t a = 0; a < 4; ++a) {
    CHECK(res.per_angle[a].angle == doctest::Approx(p.angles[a]));
    CHECK(res.per_angle[a].episodes == 10);
    std::vector<double> tsr;
    for (const auto& e : res.episodes) {
      if (e.angle_index == static_cast<int>(a)) tsr.push_back(e.tsr);
    }
    CHECK(res.per_angle[a].tsr_mean == doctest::Approx(mean(tsr)).epsilon(1e-12));
    CHECK(res.per_angle[a].tsr_std == doctest::Approx(sample_std(tsr)).epsilon(1e-12));
  }
  const auto all = res.tsr_values();
  CHECK(res.tsr_mean == doctest::Approx(mean(all)).epsilon(1e-12));
  CHECK(res.tsr_std == doctest::Approx(sample_std(all)).epsilon(1e-12));
  std::vector<double> cr;
  for (const auto& e : res.episodes) cr.push_back(e.cr);
  CHECK(res.cr_mean == doctest::Approx(mean(cr)).epsilon(1e-12));
}

TEST_CASE("TSR recomputes from the exported trace") {
  EpisodeConfig cfg;
  cfg.phase = 2;
  const EvalProtocol p = small_protocol(2);
  const auto res = run_protocol(random_policy(3), cfg, p, 21, true);
  std::stringstream all;
  write_traces_csv(all, res);
  std::string header;
  std::getline(all, header);
  CHECK(header == "episode,angle,step,drone_x,drone_y,yaw,target_x,target_y,phi,r_gc,r_dt,action");

  for (const auto& e : res.episodes) {
    REQUIRE(static_cast<int>(e.trace.size()) == e.length);
    std::stringstream ss;
    write_trace_csv(ss, e.trace);
    const auto back = read_trace_csv(ss);
    REQUIRE(back.size() == e.trace.size());
    int hits = 0;
    double cr = 0.0;
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].step == static_cast<int>(i) + 1);
      CHECK(back[i].r_gc == e.trace[i].r_gc);  // full precision round trip
      hits += back[i].r_dt;
      cr += back[i].r_gc;
    }
    CHECK(trace_tsr(back, p.e_ml) == doctest::Approx(static_cast<double>(hits) / p.e_ml).epsilon(1e-15));
    CHECK(e.tsr == doctest::Approx(trace_tsr(back, p.e_ml)).epsilon(1e-15));
    CHECK(e.cr == doctest::Approx(cr).epsilon(1e-12));
  }
}

TEST_CASE("trace reader rejects malformed input") {
  std::stringstream bad_header("step,x\n1,2\n");
  CHECK_THROWS(read_trace_csv(bad_header));
  std::stringstream bad_row("step,drone_x,drone_y,yaw,target_x,target_y,phi,r_gc,r_dt,action\n1,2,3\n");
  CHECK_THROWS(read_trace_csv(bad_row));
}

TEST_CASE("evaluation is deterministic for a fixed seed") {
  EpisodeConfig cfg;
  cfg.phase = 2;
  const EvalProtocol p = small_protocol(2, 400);
  const auto a = run_protocol(random_policy(8), cfg, p, 5);
  const auto b = run_protocol(random_policy(8), cfg, p, 5);
  REQUIRE(a.episode_count() == b.episode_count());
  for (int i = 0; i < a.episode_count(); ++i) {
    CHECK(a.episodes[i].cr == b.episodes[i].cr);
    CHECK(a.episodes[i].tsr == b.episodes[i].tsr);
    CHECK(a.episodes[i].length == b.episodes[i].length);
  }
  const auto c = run_protocol(random_policy(8), cfg, p, 6);
  CHECK(c.cr_mean != a.cr_mean);
}

TEST_CASE("every angle shares the episode seed schedule") {
  // Only the yaw offset differs across angles, so identical angles give identical episodes.
  EpisodeConfig cfg;
  cfg.phase = 2;
  EvalProtocol p = small_protocol(3);
  p.angles = {1.0, 1.0 + 1e-12};
  const auto res = run_protocol(constant_policy(Action::forward), cfg, p, 9);
  for (int k = 0; k < 3; ++k) {
    CHECK(res.episodes[k].length == res.episodes[3 + k].length);
    CHECK(res.episodes[k].cr == doctest::Approx(res.episodes[3 + k].cr).epsilon(1e-6));
  }
}

TEST_CASE("a hovering drone loses a straight-moving target for good") {
  // The footprint is convex and the phase-1 target moves in a straight line at
  // constant speed from the footprint's goal point, so r_dt is a prefix of ones.
  EpisodeConfig cfg;
  const EvalProtocol p = small_protocol(5);
  const auto res = run_protocol(constant_policy(Action::stop), cfg, p, 3, true);
  for (const auto& e : res.episodes) {
    bool left = false;
    for (const auto& row : e.trace) {
      if (row.r_dt == 0) left = true;
      if (left) CHECK(row.r_dt == 0);
    }
    CHECK(e.length < cfg.max_steps);
    // Terminated exactly lost_threshold steps after the last frame in view.
    const int seen = static_cast<int>(std::count_if(e.trace.begin(), e.trace.end(),
                                                    [](const TraceRow& r) { return r.r_dt == 1; }));
    CHECK(e.length == seen + cfg.lost_threshold);
  }
  CHECK(res.tsr_mean < 0.2);
}

TEST_CASE("a stationary target under a hovering drone is tracked throughout") {
  EpisodeConfig cfg;
  cfg.target_max_speed = 0.0;
  const EvalProtocol p = small_protocol(2);
  const auto res = run_protocol(constant_policy(Action::stop), cfg, p, 4);
  for (const auto& e : res.episodes) {
    CHECK(e.length == 1500);
    CHECK(e.tsr == 1.0);
    CHECK(e.cr == doctest::Approx(1500 * std::tanh(4.0)).epsilon(1e-9));
  }
  CHECK(res.tsr_std == 0.0);

  // Shorter episodes still divide by the protocol length.
  const auto short_res = run_protocol(constant_policy(Action::stop), cfg, small_protocol(1, 3000), 4);
  CHECK(short_res.tsr_mean == doctest::Approx(0.5));
}

TEST_CASE("random policy stays near the floor") {
  EpisodeConfig cfg;
  cfg.phase = 2;
  const auto res = run_protocol(random_policy(1), cfg, EvalProtocol{}, 99);
  CHECK(res.episode_count() == 40);
  CHECK(res.tsr_mean > 0.0);
  CHECK(res.tsr_mean < 0.15);
}

TEST_CASE("greedy policy follows the actor argmax") {
  Rng rng(1);
  const auto params = PolicyParams::make(ObservationStack::size(ObservationMode::features), kNumActions, {8}, rng);
  EpisodeConfig cfg;
  TrackingEnv env(cfg);
  const auto& obs = env.reset(3);
  const Policy pol = greedy_policy(params);
  CHECK(static_cast<int>(pol(obs, env)) == params.greedy_action(obs));
}

TEST_CASE("Welch t-test") {
  const std::vector<double> a = {0.1, 0.2, 0.3, 0.4, 0.5};
  SUBCASE("identical samples") {
    const auto w = welch_t_test(a, a);
    CHECK(w.diff == 0.0);
    CHECK(w.p == doctest::Approx(1.0));
  }
  SUBCASE("disjoint samples") {
    const std::vector<double> b = {0.9, 0.91, 0.92, 0.93, 0.94};
    const auto w = welch_t_test(b, a);
    CHECK(w.diff > 0.0);
    CHECK(w.p < 1e-3);
  }
  SUBCASE("reference value") {
    // Unequal variances: t = -2.0 / sqrt(2.5/5 + 10/5), df from Welch-Satterthwaite.
    const std::vector<double> x = {1, 2, 3, 4, 5};
    const std::vector<double> y = {0.0, 2.5, 5.0, 7.5, 0.0};
    const double vx = 2.5, vy = sample_std(y) * sample_std(y);
    const double se2 = vx / 5 + vy / 5;
    const auto w = welch_t_test(x, y);
    CHECK(w.t == doctest::Approx((3.0 - 3.0) / std::sqrt(se2)));
    CHECK(w.df == doctest::Approx(se2 * se2 / ((vx / 5) * (vx / 5) / 4 + (vy / 5) * (vy / 5) / 4)));
  }
  SUBCASE("degenerate inputs") {
    const std::vector<double> c = {0.5, 0.5, 0.5};
    CHECK(welch_t_test(c, c).p == 1.0);
    CHECK(welch_t_test(c, {0.6, 0.6}).p == 0.0);
    CHECK_THROWS_AS(welch_t_test({1.0}, a), std::invalid_argument);
  }
}

TEST_CASE("ablation report") {
  EvalResult r1, r2;
  for (int i = 0; i < 4; ++i) {
    EpisodeRecord e;
    e.tsr = 0.5 + 0.01 * i;
    e.cr = 100.0 + i;
    r1.episodes.push_back(e);
    e.tsr = 0.2 + 0.01 * i;
    r2.episodes.push_back(e);
  }
  r1.tsr_mean = 0.515;
  r2.tsr_mean = 0.215;
  const auto rep = ablation_report({{"gc", r1}, {"dist", r2}});
  REQUIRE(rep.pairs.size() == 1);
  CHECK(rep.pairs[0].a == "gc");
  CHECK(rep.pairs[0].b == "dist");
  CHECK(rep.pairs[0].test.diff == doctest::Approx(0.3));
  const std::string text = format_report(rep);
  CHECK(text.find("gc") != std::string::npos);
  CHECK(text.find("gc vs dist") != std::string::npos);
  std::stringstream csv;
  write_report_csv(csv, rep);
  std::string line;
  std::getline(csv, line);
  CHECK(line.rfind("config,", 0) == 0);
  CHECK_THROWS_AS(ablation_report({{"gc", r1}}), std::invalid_argument);
}

TEST_CASE("distance disagrees with deviation ordering at every sampled pose") {
  const auto rep = verify_proposition(100, 10000, 7);
  CHECK(rep.rows.size() == 100);
  CHECK(rep.found() == 100);
  CHECK(rep.passed());
  for (const auto& row : rep.rows) {
    // The witness pair orders one way by deviation and the other by distance.
    CHECK(row.phi1 < row.phi2);
    CHECK(row.d1 > row.d2);
    CHECK(row.phi2 <= 1.0 + 1e-9);
  }
  std::stringstream csv;
  write_proposition_csv(csv, rep);
  std::string header;
  std::getline(csv, header);
  CHECK(header == "pose_id,pitch,altitude,phi1,phi2,d1,d2,found");
}

TEST_CASE("proposition search edge cases") {
  CHECK(verify_proposition(0, 100, 1).passed());
  // Nadir view: the footprint is a centered rectangle and counterexamples still exist.
  const auto rep = verify_proposition({PoseSample{std::numbers::pi / 2, 20.0, 0.0}},
                                      CameraIntrinsics::make(84, 84, 1.0), 10000, 2);
  CHECK(rep.found() == 1);
}

TEST_CASE("sampled poses follow the reset ranges") {
  EpisodeConfig cfg;
  const auto poses = sample_poses(500, cfg, 3);
  REQUIRE(poses.size() == 500);
  for (const auto& p : poses) {
    CHECK(p.pitch >= cfg.pitch_min);
    CHECK(p.pitch <= cfg.pitch_max);
    CHECK(p.altitude >= cfg.altitude_min);
    CHECK(p.altitude <= cfg.altitude_max);
  }
  CHECK(sample_poses(5, cfg, 3)[4].pitch == poses[4].pitch);
}

TEST_CASE("frustum projection matches the world-frame ray oracle") {
  const auto rep = geometry_oracle_check(2000, 17);
  CHECK(rep.poses == 2000);
  CHECK(rep.passed());
  CHECK(rep.max_rel_error < 1e-9);
}
