#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <numbers>
#include <string>
#include <vector>

#include "vat/env.hpp"
#include "vat/ppo.hpp"

namespace vat {

struct EvalProtocol {
  std::vector<double> angles = {0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi};
  int episodes_per_angle = 10;
  int e_ml = 1500;  // TSR denominator

  /// Angles distinct and in [0, 2 pi); positive counts.
  void validate() const;
};

/// Chooses an action from the current observation and environment.
using Policy = std::function<Action(const std::vector<double>& obs, const TrackingEnv& env)>;

Policy greedy_policy(const PolicyParams& params);
/// Uniform over the 7 actions, driven by its own generator.
Policy random_policy(std::uint64_t seed);
Policy constant_policy(Action a);

struct TraceRow {
  int step = 0;
  double drone_x = 0.0, drone_y = 0.0, yaw = 0.0;
  double target_x = 0.0, target_y = 0.0;
  double phi = 0.0, r_gc = 0.0;
  int r_dt = 0;
  int action = 0;
};

struct EpisodeRecord {
  int angle_index = 0;
  double angle = 0.0;
  int episode = 0;
  double cr = 0.0;
  double tsr = 0.0;
  int length = 0;
  std::vector<TraceRow> trace;  // filled when traces are requested
};

struct AngleSummary {
  double angle = 0.0;
  double cr_mean = 0.0, cr_std = 0.0;
  double tsr_mean = 0.0, tsr_std = 0.0;
  int episodes = 0;
};

/// Standard deviations use the n - 1 denominator.
struct EvalResult {
  double cr_mean = 0.0, cr_std = 0.0;
  double tsr_mean = 0.0, tsr_std = 0.0;
  std::vector<AngleSummary> per_angle;
  std::vector<EpisodeRecord> episodes;  // angle-major order

  int episode_count() const { return static_cast<int>(episodes.size()); }
  std::vector<double> tsr_values() const;
};

/// Episode `k` of every angle reuses the same derived seed, so angles differ
/// only in the pinned yaw offset. Runs in the cfg's phase.
EvalResult run_protocol(const Policy& policy, const EpisodeConfig& cfg, const EvalProtocol& protocol,
                        std::uint64_t seed, bool keep_traces = false);
EvalResult run_protocol(const PolicyParams& params, const EpisodeConfig& cfg, const EvalProtocol& protocol,
                        std::uint64_t seed, bool keep_traces = false);

/// Sum of r_dt over the trace divided by e_ml.
double trace_tsr(const std::vector<TraceRow>& trace, int e_ml);

/// CSV `episode,angle,` followed by the trace columns; one block per episode.
void write_traces_csv(std::ostream& out, const EvalResult& result);
/// Header `step,drone_x,drone_y,yaw,target_x,target_y,phi,r_gc,r_dt,action`.
void write_trace_csv(std::ostream& out, const std::vector<TraceRow>& trace);
std::vector<TraceRow> read_trace_csv(std::istream& in);

/// Summary CSV: one row per angle plus an `all` row.
void write_eval_csv(std::ostream& out, const EvalResult& result);

struct WelchResult {
  double diff = 0.0;  // mean(a) - mean(b)
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

/// Two-sided Welch t-test. Degenerate zero-variance samples give p = 1 for
/// equal means and p = 0 otherwise. Needs at least two values per sample.
WelchResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b);

struct NamedResult {
  std::string name;
  EvalResult result;
};

struct AblationPair {
  std::string a, b;
  WelchResult test;
};

struct AblationReport {
  std::vector<NamedResult> rows;
  std::vector<AblationPair> pairs;
};

/// Throws std::invalid_argument with fewer than two results.
AblationReport ablation_report(std::vector<NamedResult> results);
std::string format_report(const AblationReport& report);
void write_report_csv(std::ostream& out, const AblationReport& report);

struct PoseSample {
  double pitch = 1.0;
  double altitude = 20.0;
  double yaw = 0.0;
};

/// Pitch, altitude and yaw drawn from the reset randomization ranges.
std::vector<PoseSample> sample_poses(std::size_t n, const EpisodeConfig& cfg, std::uint64_t seed);

/// Ground projection of the camera at `pose` above flat ground, camera frame.
GroundProjection pose_projection(const PoseSample& pose, const CameraIntrinsics& intr, double ground_height = 0.0);

struct PropositionRow {
  int pose_id = 0;
  PoseSample pose;
  bool found = false;
  double phi1 = 0.0, phi2 = 0.0, d1 = 0.0, d2 = 0.0;
};

struct PropositionReport {
  std::vector<PropositionRow> rows;
  bool passed() const;
  int found() const;
};

PropositionReport verify_proposition(const std::vector<PoseSample>& poses, const CameraIntrinsics& intr,
                                     std::size_t samples_per_pose, std::uint64_t seed);
PropositionReport verify_proposition(std::size_t n_poses, std::size_t samples_per_pose, std::uint64_t seed,
                                     const EpisodeConfig& cfg = {});

/// Header `pose_id,pitch,altitude,phi1,phi2,d1,d2,found`.
void write_proposition_csv(std::ostream& out, const PropositionReport& report);

struct OracleReport {
  int poses = 0;
  int within = 0;
  double max_rel_error = 0.0;
  double tolerance = 1e-9;
  bool passed() const { return within == poses; }
};

/// Compares the camera-frame frustum projection against world-frame ray /
/// ground-plane intersections over random poses. The error of each point is
/// scaled by its distance from the camera.
OracleReport geometry_oracle_check(std::size_t n_poses, std::uint64_t seed, const EpisodeConfig& cfg = {},
                                   double tolerance = 1e-9);

}  // namespace vat
