#include "vat/cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include "vat/checkpoint.hpp"
#include "vat/config.hpp"
#include "vat/errors.hpp"

namespace vat {

namespace {

namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> workers;
};

// Short scientific form: 1e-9 rather than 1e-09.
std::string sci(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  std::string s = buf;
  for (const char* pat : {"e-0", "e+0"}) {
    const auto p = s.find(pat);
    if (p != std::string::npos) s.erase(p + 2, 1);
  }
  const auto plus = s.find("e+");
  if (plus != std::string::npos) s.erase(plus + 1, 1);
  return s;
}

RunConfig resolve(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out = *f.out;
  if (f.workers) c.ppo.workers = *f.workers;
  c.validate();
  return c;
}

fs::path out_dir(const RunConfig& c) {
  fs::path p(c.out);
  fs::create_directories(p);
  return p;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

std::vector<PoseSample> read_pose_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read pose file " + path, 0, "pose_file");
  std::vector<PoseSample> poses;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("pitch", 0) == 0) continue;  // header
    std::istringstream ls(line);
    PoseSample p;
    char comma = 0;
    if (!(ls >> p.pitch >> comma >> p.altitude) || comma != ',') {
      throw ConfigError("pose file " + path + ": expected 'pitch,altitude[,yaw]'", lineno);
    }
    if (ls >> comma) {
      if (comma != ',' || !(ls >> p.yaw)) throw ConfigError("pose file " + path + ": bad yaw column", lineno);
    }
    poses.push_back(p);
  }
  return poses;
}

int cmd_verify_geometry(const RunConfig& c, std::ostream& out) {
  const auto rep = geometry_oracle_check(static_cast<std::size_t>(c.verify.oracle_poses), c.seed, c.env,
                                         c.verify.tolerance);
  auto f = open_out(out_dir(c) / "verify_geometry.csv");
  f.precision(17);
  f << "poses,within,tolerance,max_rel_error\n"
    << rep.poses << ',' << rep.within << ',' << rep.tolerance << ',' << rep.max_rel_error << '\n';
  out << rep.within << '/' << rep.poses << " poses within " << sci(rep.tolerance) << " (max relative error "
      << sci(rep.max_rel_error) << ")\n";
  return rep.passed() ? kExitOk : kExitFailed;
}

int cmd_counterexample(const RunConfig& c, std::ostream& out) {
  const auto poses = c.verify.pose_file.empty()
                         ? sample_poses(static_cast<std::size_t>(c.verify.proposition_poses), c.env, c.seed)
                         : read_pose_file(c.verify.pose_file);
  const auto rep =
      verify_proposition(poses, c.env.camera, static_cast<std::size_t>(c.verify.samples_per_pose), c.seed);
  auto f = open_out(out_dir(c) / "counterexample.csv");
  write_proposition_csv(f, rep);
  out << rep.found() << '/' << rep.rows.size() << " poses with a counterexample\n";
  return rep.passed() ? kExitOk : kExitFailed;
}

int cmd_contours(RunConfig c, const std::optional<std::string>& field, std::optional<int> ny, std::optional<int> nz,
                 std::ostream& out) {
  if (field) c.contours.field = *field;
  if (ny) c.contours.ny = *ny;
  if (nz) c.contours.nz = *nz;
  c.validate();
  const Field which = *parse_field(c.contours.field);
  const PoseSample pose{c.contours.pitch, c.contours.altitude, 0.0};
  DroneState d;
  d.position = Vec3(0, 0, c.env.ground_height + pose.altitude);
  d.gimbal_pitch = pose.pitch;
  const auto ground = plane_in_frame(PlaneCoeffs::ground(c.env.ground_height), camera_pose(d).inverse());
  const auto view = make_reward_view(c.env.camera, ground, c.env.reward);
  const auto grid = contour_grid(view, which, c.contours.ny, c.contours.nz, c.env.reward);
  const fs::path path = out_dir(c) / ("contours_" + std::string(field_name(which)) + ".csv");
  auto f = open_out(path);
  write_csv(f, grid);

  double clip_max = -1.0;
  int inside = 0, in_clip = 0;
  for (std::size_t k = 0; k < grid.values.size(); ++k) {
    inside += grid.inside[k];
    if (grid.in_clip[k]) {
      ++in_clip;
      clip_max = std::max(clip_max, grid.values[k]);
    }
  }
  out.precision(9);
  out << "wrote " << path.string() << ": " << grid.ny << 'x' << grid.nz << " cells, " << inside << " inside, "
      << in_clip << " in clip, in-clip max " << clip_max << '\n';
  return kExitOk;
}

int cmd_train(RunConfig c, const std::optional<std::string>& reward, bool no_curriculum,
              const std::optional<std::string>& name, bool verbose, std::ostream& out) {
  if (reward) c.reward_kind = parse_reward_kind(*reward);
  if (no_curriculum) c.curriculum.enabled = false;
  c.validate();
  const std::string stem =
      name ? *name : std::string(reward_kind_name(c.reward_kind)) + (c.curriculum.enabled ? "" : "-nocur");
  const EpisodeConfig env = c.env;
  const RewardKind kind = c.reward_kind;
  const auto res = curriculum_train([&](int) { return std::make_unique<TrackingTask>(env, kind); }, c.ppo,
                                    c.curriculum, c.env.reward.alpha, c.seed, [&](const LogRow& r) {
                                      if (verbose) {
                                        out << "step " << r.step << " phase " << r.phase << " mean_reward "
                                            << r.mean_reward << " tsr " << r.tsr_estimate << '\n';
                                      }
                                    });
  const fs::path dir = out_dir(c);
  save_checkpoint(dir / (stem + ".ckpt"), res.params, c.to_ini());
  auto f = open_out(dir / (stem + "_log.csv"));
  write_log_csv(f, res.log);
  out << "trained " << stem << ": " << res.steps << " steps, " << res.log.size() << " updates, ";
  if (res.switch_step) out << "phase 2 from step " << *res.switch_step;
  else if (c.curriculum.enabled) out << "threshold " << c.curriculum.eta << " not reached";
  else out << "phase 2 throughout";
  if (!res.log.empty()) out << ", final mean_reward " << res.log.back().mean_reward;
  out << '\n' << "wrote " << (dir / (stem + ".ckpt")).string() << '\n';
  return kExitOk;
}

PolicyParams load_policy(const std::string& path, const EpisodeConfig& env) {
  if (!fs::exists(path)) throw CheckpointError("checkpoint not found: " + path);
  auto ck = load_checkpoint(path);
  const int want = ObservationStack::size(env.observation);
  if (ck.params.obs_dim() != want || ck.params.n_actions() != kNumActions) {
    throw CheckpointError("checkpoint " + path + " expects " + std::to_string(ck.params.obs_dim()) +
                          " inputs, the configured environment produces " + std::to_string(want));
  }
  return std::move(ck.params);
}

int cmd_eval(const RunConfig& c, const std::optional<std::string>& checkpoint, const std::vector<std::string>& compare,
             bool random, bool traces, std::ostream& out) {
  EpisodeConfig env = c.env;
  env.phase = c.eval_phase;
  const fs::path dir = out_dir(c);
  if (!compare.empty()) {
    if (compare.size() < 2) throw ConfigError("--compare needs at least two checkpoints");
    std::vector<NamedResult> named;
    for (const auto& p : compare) {
      const PolicyParams params = load_policy(p, env);
      named.push_back({fs::path(p).stem().string(), run_protocol(params, env, c.eval, c.seed)});
    }
    if (random) named.push_back({"random", run_protocol(random_policy(derive_seed(c.seed, "random-policy", 0)), env, c.eval, c.seed)});
    const auto rep = ablation_report(std::move(named));
    auto f = open_out(dir / "ablation.csv");
    write_report_csv(f, rep);
    out << format_report(rep);
    return kExitOk;
  }

  EvalResult res;
  if (random) {
    res = run_protocol(random_policy(derive_seed(c.seed, "random-policy", 0)), env, c.eval, c.seed, traces);
  } else {
    if (!checkpoint) throw ConfigError("eval needs a checkpoint, --random or --compare");
    const PolicyParams params = load_policy(*checkpoint, env);
    res = run_protocol(params, env, c.eval, c.seed, traces);
  }
  auto f = open_out(dir / "eval.csv");
  write_eval_csv(f, res);
  if (traces) {
    auto t = open_out(dir / "traces.csv");
    write_traces_csv(t, res);
  }
  out << std::fixed;
  out.precision(3);
  out << res.episode_count() << " episodes: TSR " << res.tsr_mean << " +- " << res.tsr_std << ", CR "
      << std::setprecision(1) << res.cr_mean << " +- " << res.cr_std << '\n';
  for (const auto& a : res.per_angle) {
    out << "  angle " << std::setprecision(4) << a.angle << ": TSR " << std::setprecision(3) << a.tsr_mean << " +- "
        << a.tsr_std << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Goal-centered visual active tracking: geometry checks, training and evaluation", "vatrack"};
  app.require_subcommand(1);
  app.fallthrough();

  Flags flags;
  app.add_option("--config", flags.config, "Configuration file");
  app.add_option("--seed", flags.seed, "Root seed");
  app.add_option("--out", flags.out, "Output directory");
  app.add_option("--workers", flags.workers, "Rollout workers")->check(CLI::PositiveNumber);

  auto* verify = app.add_subcommand("verify-geometry", "Compare frustum projections with a ray-plane oracle");
  auto* counter = app.add_subcommand("counterexample", "Search distance/deviation counterexamples per pose");

  auto* contours = app.add_subcommand("contours", "Export a reward or deviation grid as CSV");
  std::optional<std::string> field;
  std::optional<int> ny, nz;
  contours->add_option("--field", field, "deviation | goal-centered | distance");
  contours->add_option("--ny", ny, "Cells along image y");
  contours->add_option("--nz", nz, "Cells along image z");

  auto* train = app.add_subcommand("train", "Train a policy with PPO");
  std::optional<std::string> reward, name;
  bool no_curriculum = false, verbose = false;
  train->add_option("--reward", reward, "goal-centered | distance");
  train->add_flag("--no-curriculum", no_curriculum, "Start directly in phase 2");
  train->add_option("--name", name, "Output file stem");
  train->add_flag("--verbose", verbose, "Print one line per update");

  auto* eval = app.add_subcommand("eval", "Run the evaluation protocol");
  std::optional<std::string> checkpoint;
  std::vector<std::string> compare;
  bool random = false, traces = false;
  eval->add_option("checkpoint", checkpoint, "Checkpoint to evaluate");
  eval->add_option("--compare", compare, "Checkpoints to compare")->expected(2, 64);
  eval->add_flag("--random", random, "Evaluate the uniform-random policy");
  eval->add_flag("--traces", traces, "Also write per-step traces");

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "vatrack: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    const RunConfig cfg = resolve(flags);
    if (verify->parsed()) return cmd_verify_geometry(cfg, out);
    if (counter->parsed()) return cmd_counterexample(cfg, out);
    if (contours->parsed()) return cmd_contours(cfg, field, ny, nz, out);
    if (train->parsed()) return cmd_train(cfg, reward, no_curriculum, name, verbose, out);
    if (eval->parsed()) return cmd_eval(cfg, checkpoint, compare, random, traces, out);
  } catch (const ConfigError& e) {
    err << "vatrack: config error: " << e.what();
    if (!e.key().empty()) err << " [key: " << e.key() << ']';
    err << '\n';
    return kExitUsage;
  } catch (const CheckpointError& e) {
    err << "vatrack: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "vatrack: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "vatrack: " << e.what() << '\n';
    return kExitFailed;
  }
  return kExitUsage;
}

}  // namespace vat
