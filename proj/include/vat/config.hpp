#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "vat/curriculum.hpp"
#include "vat/env.hpp"
#include "vat/eval.hpp"
#include "vat/ppo.hpp"

namespace vat {

struct VerifyConfig {
  int oracle_poses = 10000;
  double tolerance = 1e-9;
  int proposition_poses = 100;
  int samples_per_pose = 10000;
  std::string pose_file;  // optional CSV `pitch,altitude[,yaw]` replacing random poses
};

struct ContourConfig {
  std::string field = "goal-centered";
  int ny = 201, nz = 201;
  double pitch = 1.0;
  double altitude = 17.0;
};

/// Everything one experiment needs. Camera geometry and reward parameters
/// live inside `env`.
struct RunConfig {
  EpisodeConfig env;
  PpoConfig ppo;
  CurriculumConfig curriculum;
  RewardKind reward_kind = RewardKind::goal_centered;
  EvalProtocol eval;
  int eval_phase = 2;
  VerifyConfig verify;
  ContourConfig contours;
  std::uint64_t seed = 1;
  std::string out = "out";

  /// Re-checks every component invariant. Throws ConfigError.
  void validate() const;
  /// Canonical text form; parse_config(to_ini()) reproduces this config.
  std::string to_ini() const;
};

/// INI-style text: `[section]` headers, `key = value` lines, `#` or `;`
/// comments. Unknown sections or keys, duplicates and bad values raise
/// ConfigError carrying the line number and key.
RunConfig parse_config(std::string_view text);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace vat
