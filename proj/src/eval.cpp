#include "vat/eval.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <iomanip>
#include <istream>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace vat {

void EvalProtocol::validate() const {
  if (angles.empty()) throw std::invalid_argument("EvalProtocol: at least one angle is required");
  for (std::size_t i = 0; i < angles.size(); ++i) {
    if (!(angles[i] >= 0.0 && angles[i] < 2.0 * std::numbers::pi)) {
      throw std::invalid_argument("EvalProtocol: angles must lie in [0, 2 pi)");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (angles[i] == angles[j]) throw std::invalid_argument("EvalProtocol: angles must be distinct");
    }
  }
  if (episodes_per_angle <= 0) throw std::invalid_argument("EvalProtocol: episodes_per_angle must be positive");
  if (e_ml <= 0) throw std::invalid_argument("EvalProtocol: e_ml must be positive");
}

Policy greedy_policy(const PolicyParams& params) {
  return [&params](const std::vector<double>& obs, const TrackingEnv&) {
    return static_cast<Action>(params.greedy_action(obs));
  };
}

Policy random_policy(std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng](const std::vector<double>&, const TrackingEnv&) {
    return static_cast<Action>(rng->uniform_int(0, kNumActions - 1));
  };
}

Policy constant_policy(Action a) {
  return [a](const std::vector<double>&, const TrackingEnv&) { return a; };
}

namespace {

void mean_std(const std::vector<double>& xs, double& mean, double& sd) {
  mean = sd = 0.0;
  if (xs.empty()) return;
  // Sorted so the reduction does not depend on episode order.
  std::vector<double> s = xs;
  std::sort(s.begin(), s.end());
  for (double x : s) mean += x;
  mean /= static_cast<double>(s.size());
  if (s.size() < 2) return;
  double ss = 0.0;
  for (double x : s) ss += (x - mean) * (x - mean);
  sd = std::sqrt(ss / static_cast<double>(s.size() - 1));
}

}  // namespace

std::vector<double> EvalResult::tsr_values() const {
  std::vector<double> out;
  for (const auto& e : episodes) out.push_back(e.tsr);
  return out;
}

EvalResult run_protocol(const Policy& policy, const EpisodeConfig& cfg, const EvalProtocol& protocol,
                        std::uint64_t seed, bool keep_traces) {
  protocol.validate();
  TrackingEnv env(cfg);
  EvalResult result;
  for (std::size_t ai = 0; ai < protocol.angles.size(); ++ai) {
    const double angle = protocol.angles[ai];
    for (int k = 0; k < protocol.episodes_per_angle; ++k) {
      EpisodeRecord rec;
      rec.angle_index = static_cast<int>(ai);
      rec.angle = angle;
      rec.episode = k;
      const std::vector<double>* obs = &env.reset(derive_seed(seed, "eval-episode", static_cast<std::uint64_t>(k)),
                                                  ResetOptions{angle});
      double sum_dt = 0.0;
      while (!env.state().done) {
        const Action a = policy(*obs, env);
        const StepResult r = env.step(a);
        rec.cr += r.r_gc;
        sum_dt += r.r_dt;
        ++rec.length;
        if (keep_traces) {
          const WorldState& s = env.state();
          rec.trace.push_back(TraceRow{s.step, s.drone.position.x(), s.drone.position.y(), s.drone.yaw,
                                       s.target.position.x(), s.target.position.y(), r.info.phi, r.r_gc, r.r_dt,
                                       static_cast<int>(a)});
        }
        obs = &env.observation();
      }
      rec.tsr = sum_dt / protocol.e_ml;
      result.episodes.push_back(std::move(rec));
    }
  }

  std::vector<double> cr_all, tsr_all;
  for (std::size_t ai = 0; ai < protocol.angles.size(); ++ai) {
    std::vector<double> cr, tsr;
    for (const auto& e : result.episodes) {
      if (e.angle_index != static_cast<int>(ai)) continue;
      cr.push_back(e.cr);
      tsr.push_back(e.tsr);
    }
    AngleSummary s;
    s.angle = protocol.angles[ai];
    s.episodes = static_cast<int>(cr.size());
    mean_std(cr, s.cr_mean, s.cr_std);
    mean_std(tsr, s.tsr_mean, s.tsr_std);
    result.per_angle.push_back(s);
    cr_all.insert(cr_all.end(), cr.begin(), cr.end());
    tsr_all.insert(tsr_all.end(), tsr.begin(), tsr.end());
  }
  mean_std(cr_all, result.cr_mean, result.cr_std);
  mean_std(tsr_all, result.tsr_mean, result.tsr_std);
  return result;
}

EvalResult run_protocol(const PolicyParams& params, const EpisodeConfig& cfg, const EvalProtocol& protocol,
                        std::uint64_t seed, bool keep_traces) {
  return run_protocol(greedy_policy(params), cfg, protocol, seed, keep_traces);
}

double trace_tsr(const std::vector<TraceRow>& trace, int e_ml) {
  double s = 0.0;
  for (const auto& r : trace) s += r.r_dt;
  return s / e_ml;
}

namespace {

constexpr const char* kTraceHeader = "step,drone_x,drone_y,yaw,target_x,target_y,phi,r_gc,r_dt,action";

void write_row(std::ostream& out, const TraceRow& r) {
  out << r.step << ',' << r.drone_x << ',' << r.drone_y << ',' << r.yaw << ',' << r.target_x << ',' << r.target_y
      << ',' << r.phi << ',' << r.r_gc << ',' << r.r_dt << ',' << r.action << '\n';
}

}  // namespace

void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  const auto prec = out.precision(17);
  out << kTraceHeader << '\n';
  for (const auto& r : trace) write_row(out, r);
  out.precision(prec);
}

void write_traces_csv(std::ostream& out, const EvalResult& result) {
  const auto prec = out.precision(17);
  out << "episode,angle," << kTraceHeader << '\n';
  for (std::size_t i = 0; i < result.episodes.size(); ++i) {
    for (const auto& r : result.episodes[i].trace) {
      out << i << ',' << result.episodes[i].angle << ',';
      write_row(out, r);
    }
  }
  out.precision(prec);
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw std::runtime_error("read_trace_csv: missing or unexpected header");
  }
  std::vector<TraceRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    TraceRow r;
    char c[9];
    ls >> r.step >> c[0] >> r.drone_x >> c[1] >> r.drone_y >> c[2] >> r.yaw >> c[3] >> r.target_x >> c[4] >>
        r.target_y >> c[5] >> r.phi >> c[6] >> r.r_gc >> c[7] >> r.r_dt >> c[8] >> r.action;
    if (!ls || std::any_of(std::begin(c), std::end(c), [](char x) { return x != ','; })) {
      throw std::runtime_error("read_trace_csv: malformed row at line " + std::to_string(lineno));
    }
    rows.push_back(r);
  }
  return rows;
}

void write_eval_csv(std::ostream& out, const EvalResult& result) {
  const auto prec = out.precision(17);
  out << "angle,episodes,cr_mean,cr_std,tsr_mean,tsr_std\n";
  for (const auto& a : result.per_angle) {
    out << a.angle << ',' << a.episodes << ',' << a.cr_mean << ',' << a.cr_std << ',' << a.tsr_mean << ','
        << a.tsr_std << '\n';
  }
  out << "all," << result.episode_count() << ',' << result.cr_mean << ',' << result.cr_std << ',' << result.tsr_mean
      << ',' << result.tsr_std << '\n';
  out.precision(prec);
}

WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("welch_t_test: need at least two values per sample");
  double ma, sa, mb, sb;
  mean_std(a, ma, sa);
  mean_std(b, mb, sb);
  WelchResult r;
  r.diff = ma - mb;
  const double va = sa * sa / static_cast<double>(a.size());
  const double vb = sb * sb / static_cast<double>(b.size());
  const double se2 = va + vb;
  if (se2 == 0.0) {
    r.p = r.diff == 0.0 ? 1.0 : 0.0;
    r.t = r.diff == 0.0 ? 0.0 : std::copysign(INFINITY, r.diff);
    r.df = static_cast<double>(a.size() + b.size() - 2);
    return r;
  }
  r.t = r.diff / std::sqrt(se2);
  r.df = se2 * se2 /
         (va * va / static_cast<double>(a.size() - 1) + vb * vb / static_cast<double>(b.size() - 1));
  boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

AblationReport ablation_report(std::vector<NamedResult> results) {
  if (results.size() < 2) throw std::invalid_argument("ablation_report: need at least two results");
  AblationReport rep;
  rep.rows = std::move(results);
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    for (std::size_t j = i + 1; j < rep.rows.size(); ++j) {
      rep.pairs.push_back(AblationPair{rep.rows[i].name, rep.rows[j].name,
                                       welch_t_test(rep.rows[i].result.tsr_values(), rep.rows[j].result.tsr_values())});
    }
  }
  return rep;
}

std::string format_report(const AblationReport& report) {
  std::size_t w = 6;
  for (const auto& r : report.rows) w = std::max(w, r.name.size());
  std::ostringstream os;
  os << std::fixed;
  os << std::left << std::setw(static_cast<int>(w)) << "config" << "  " << std::right << std::setw(9) << "episodes"
     << std::setw(22) << "CR (mean +- std)" << std::setw(20) << "TSR (mean +- std)" << '\n';
  for (const auto& r : report.rows) {
    std::ostringstream cr, tsr;
    cr << std::fixed << std::setprecision(2) << r.result.cr_mean << " +- " << r.result.cr_std;
    tsr << std::fixed << std::setprecision(3) << r.result.tsr_mean << " +- " << r.result.tsr_std;
    os << std::left << std::setw(static_cast<int>(w)) << r.name << "  " << std::right << std::setw(9)
       << r.result.episode_count() << std::setw(22) << cr.str() << std::setw(20) << tsr.str() << '\n';
  }
  os << '\n' << "Welch t-test on per-episode TSR\n";
  for (const auto& p : report.pairs) {
    os << "  " << p.a << " vs " << p.b << ": diff " << std::setprecision(3) << p.test.diff << ", t "
       << std::setprecision(3) << p.test.t << ", df " << std::setprecision(1) << p.test.df << ", p "
       << std::scientific << std::setprecision(3) << p.test.p << std::fixed << '\n';
  }
  return os.str();
}

void write_report_csv(std::ostream& out, const AblationReport& report) {
  const auto prec = out.precision(17);
  out << "config,episodes,cr_mean,cr_std,tsr_mean,tsr_std\n";
  for (const auto& r : report.rows) {
    out << r.name << ',' << r.result.episode_count() << ',' << r.result.cr_mean << ',' << r.result.cr_std << ','
        << r.result.tsr_mean << ',' << r.result.tsr_std << '\n';
  }
  out << "\na,b,tsr_diff,t,df,p\n";
  for (const auto& p : report.pairs) {
    out << p.a << ',' << p.b << ',' << p.test.diff << ',' << p.test.t << ',' << p.test.df << ',' << p.test.p << '\n';
  }
  out.precision(prec);
}

std::vector<PoseSample> sample_poses(std::size_t n, const EpisodeConfig& cfg, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "poses", 0));
  std::vector<PoseSample> out(n);
  for (auto& p : out) {
    p.pitch = rng.uniform(cfg.pitch_min, cfg.pitch_max);
    p.altitude = rng.uniform(cfg.altitude_min, cfg.altitude_max);
    p.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
  }
  return out;
}

GroundProjection pose_projection(const PoseSample& pose, const CameraIntrinsics& intr, double ground_height) {
  DroneState d;
  d.position = Vec3(0.0, 0.0, ground_height + pose.altitude);
  d.yaw = pose.yaw;
  d.gimbal_pitch = pose.pitch;
  const RigidTransform t_cw = camera_pose(d);
  return project_frustum(intr, plane_in_frame(PlaneCoeffs::ground(ground_height), t_cw.inverse()));
}

bool PropositionReport::passed() const {
  return std::all_of(rows.begin(), rows.end(), [](const PropositionRow& r) { return r.found; });
}

int PropositionReport::found() const {
  return static_cast<int>(std::count_if(rows.begin(), rows.end(), [](const PropositionRow& r) { return r.found; }));
}

PropositionReport verify_proposition(const std::vector<PoseSample>& poses, const CameraIntrinsics& intr,
                                     std::size_t samples_per_pose, std::uint64_t seed) {
  PropositionReport rep;
  for (std::size_t i = 0; i < poses.size(); ++i) {
    PropositionRow row;
    row.pose_id = static_cast<int>(i);
    row.pose = poses[i];
    const auto ce = find_counterexample(pose_projection(poses[i], intr), derive_seed(seed, "counterexample", i),
                                        samples_per_pose);
    if (ce) {
      row.found = true;
      row.phi1 = ce->phi1;
      row.phi2 = ce->phi2;
      row.d1 = ce->d1;
      row.d2 = ce->d2;
    }
    rep.rows.push_back(row);
  }
  return rep;
}

PropositionReport verify_proposition(std::size_t n_poses, std::size_t samples_per_pose, std::uint64_t seed,
                                     const EpisodeConfig& cfg) {
  return verify_proposition(sample_poses(n_poses, cfg, seed), cfg.camera, samples_per_pose, seed);
}

void write_proposition_csv(std::ostream& out, const PropositionReport& report) {
  const auto prec = out.precision(17);
  out << "pose_id,pitch,altitude,phi1,phi2,d1,d2,found\n";
  for (const auto& r : report.rows) {
    out << r.pose_id << ',' << r.pose.pitch << ',' << r.pose.altitude << ',';
    if (r.found) out << r.phi1 << ',' << r.phi2 << ',' << r.d1 << ',' << r.d2 << ",1\n";
    else out << "NaN,NaN,NaN,NaN,0\n";
  }
  out.precision(prec);
}

OracleReport geometry_oracle_check(std::size_t n_poses, std::uint64_t seed, const EpisodeConfig& cfg,
                                   double tolerance) {
  OracleReport rep;
  rep.tolerance = tolerance;
  Rng rng(derive_seed(seed, "oracle-poses", 0));
  const CornerRays rays = corner_rays(cfg.camera);
  const std::array<Vec3, 5> dirs = {rays.lu, rays.ld, rays.ru, rays.rd, rays.center};
  const double h = cfg.ground_height;
  for (std::size_t i = 0; i < n_poses; ++i) {
    DroneState d;
    d.gimbal_pitch = rng.uniform(cfg.pitch_min, cfg.pitch_max);
    d.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    d.position = Vec3(rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0),
                      h + rng.uniform(cfg.altitude_min, cfg.altitude_max));
    const RigidTransform t_cw = camera_pose(d);
    const GroundProjection proj =
        project_frustum(cfg.camera, plane_in_frame(PlaneCoeffs::ground(h), t_cw.inverse()));
    const std::array<Vec3, 5> got = {proj.lu, proj.ld, proj.ru, proj.rd, proj.cg};

    // World-frame route: rotate each ray, then solve C.z + t dir.z = h.
    double worst = 0.0;
    for (std::size_t k = 0; k < dirs.size(); ++k) {
      const Vec3 dir = t_cw.rotation() * dirs[k];
      const double t = (h - d.position.z()) / dir.z();
      const Vec3 expect = d.position + t * dir;
      const Vec3 actual = camera_to_world(t_cw, got[k]);
      const double err = (actual - expect).norm() / (expect - d.position).norm();
      worst = std::max(worst, std::isfinite(err) ? err : INFINITY);
    }
    ++rep.poses;
    if (worst <= tolerance) ++rep.within;
    rep.max_rel_error = std::max(rep.max_rel_error, worst);
  }
  return rep;
}

}  // namespace vat
