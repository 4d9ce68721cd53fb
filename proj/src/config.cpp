#include "vat/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <vector>

#include "vat/errors.hpp"

namespace vat {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double to_double(const std::string& v) {
  double x = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw std::invalid_argument("expected a number, got '" + v + "'");
  return x;
}

template <class Int>
Int to_int(const std::string& v) {
  Int x = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw std::invalid_argument("expected an integer, got '" + v + "'");
  }
  return x;
}

bool to_bool(const std::string& v) {
  if (v == "true" || v == "yes" || v == "1" || v == "on") return true;
  if (v == "false" || v == "no" || v == "0" || v == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  return out;
}

std::string fmt(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

template <class T>
std::string join(const std::vector<T>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ", ";
    if constexpr (std::is_floating_point_v<T>) s += fmt(xs[i]);
    else s += std::to_string(xs[i]);
  }
  return s;
}

struct Field {
  std::function<void(const std::string&)> set;
  std::function<std::string()> get;
};

using Table = std::map<std::string, std::map<std::string, Field>>;

// Camera intrinsics are parsed as raw values and rebuilt after the whole file
// is read, so the keys may appear in any order.
struct Camera {
  double width, height, fov;
};

Table make_table(RunConfig& c, Camera& cam) {
  auto dbl = [](double& ref) {
    return Field{[&ref](const std::string& v) { ref = to_double(v); }, [&ref] { return fmt(ref); }};
  };
  auto integer = [](int& ref) {
    return Field{[&ref](const std::string& v) { ref = to_int<int>(v); }, [&ref] { return std::to_string(ref); }};
  };
  auto boolean = [](bool& ref) {
    return Field{[&ref](const std::string& v) { ref = to_bool(v); }, [&ref] { return std::string(ref ? "true" : "false"); }};
  };
  auto text = [](std::string& ref) {
    return Field{[&ref](const std::string& v) { ref = v; }, [&ref] { return ref; }};
  };

  Table t;
  t["geometry"] = {{"width", dbl(cam.width)}, {"height", dbl(cam.height)}, {"fov", dbl(cam.fov)}};
  t["reward"] = {{"alpha", dbl(c.env.reward.alpha)}, {"lambda_clip", dbl(c.env.reward.lambda_clip)}};
  auto& e = c.env;
  t["env"] = {
      {"max_steps", integer(e.max_steps)},
      {"lost_threshold", integer(e.lost_threshold)},
      {"dt", dbl(e.dt)},
      {"drone_speed", dbl(e.drone_speed)},
      {"drone_yaw_rate", dbl(e.drone_yaw_rate)},
      {"target_max_speed", dbl(e.target_max_speed)},
      {"ground_height", dbl(e.ground_height)},
      {"altitude_min", dbl(e.altitude_min)},
      {"altitude_max", dbl(e.altitude_max)},
      {"pitch_min", dbl(e.pitch_min)},
      {"pitch_max", dbl(e.pitch_max)},
      {"offset_min", dbl(e.offset_min)},
      {"offset_max", dbl(e.offset_max)},
      {"occlusion_prob", dbl(e.occlusion_prob)},
      {"occlusion_min_steps", integer(e.occlusion_min_steps)},
      {"occlusion_max_steps", integer(e.occlusion_max_steps)},
      {"observation",
       Field{[&e](const std::string& v) {
               if (v == "features") e.observation = ObservationMode::features;
               else if (v == "occupancy-grid" || v == "occupancy_grid") e.observation = ObservationMode::occupancy_grid;
               else throw std::invalid_argument("expected features or occupancy-grid, got '" + v + "'");
             },
             [&e] { return std::string(e.observation == ObservationMode::features ? "features" : "occupancy-grid"); }}},
  };
  auto& p = c.ppo;
  t["learn"] = {
      {"gamma", dbl(p.gamma)},
      {"gae_lambda", dbl(p.gae_lambda)},
      {"entropy_beta", dbl(p.entropy_beta)},
      {"clip_eps", dbl(p.clip_eps)},
      {"value_coef", dbl(p.value_coef)},
      {"rollout_steps", integer(p.rollout_steps)},
      {"minibatch", integer(p.minibatch)},
      {"epochs", integer(p.epochs)},
      {"learning_rate", dbl(p.learning_rate)},
      {"max_grad_norm", dbl(p.max_grad_norm)},
      {"workers", integer(p.workers)},
      {"hidden",
       Field{[&p](const std::string& v) {
               p.hidden.clear();
               for (const auto& s : split_list(v)) p.hidden.push_back(to_int<int>(s));
             },
             [&p] { return join(p.hidden); }}},
      {"reward", Field{[&c](const std::string& v) { c.reward_kind = parse_reward_kind(v); },
                       [&c] { return std::string(reward_kind_name(c.reward_kind)); }}},
  };
  auto& cu = c.curriculum;
  t["curriculum"] = {
      {"enabled", boolean(cu.enabled)},
      {"eta", dbl(cu.eta)},
      {"window", integer(cu.window)},
      {"total_steps", Field{[&cu](const std::string& v) { cu.total_steps = to_int<std::int64_t>(v); },
                            [&cu] { return std::to_string(cu.total_steps); }}},
  };
  t["eval"] = {
      {"angles",
       Field{[&c](const std::string& v) {
               c.eval.angles.clear();
               for (const auto& s : split_list(v)) c.eval.angles.push_back(to_double(s));
             },
             [&c] { return join(c.eval.angles); }}},
      {"episodes_per_angle", integer(c.eval.episodes_per_angle)},
      {"e_ml", integer(c.eval.e_ml)},
      {"phase", integer(c.eval_phase)},
  };
  t["verify"] = {
      {"oracle_poses", integer(c.verify.oracle_poses)},
      {"tolerance", dbl(c.verify.tolerance)},
      {"proposition_poses", integer(c.verify.proposition_poses)},
      {"samples_per_pose", integer(c.verify.samples_per_pose)},
      {"pose_file", text(c.verify.pose_file)},
  };
  t["contours"] = {
      {"field", text(c.contours.field)},
      {"ny", integer(c.contours.ny)},
      {"nz", integer(c.contours.nz)},
      {"pitch", dbl(c.contours.pitch)},
      {"altitude", dbl(c.contours.altitude)},
  };
  t["run"] = {
      {"seed", Field{[&c](const std::string& v) { c.seed = to_int<std::uint64_t>(v); },
                     [&c] { return std::to_string(c.seed); }}},
      {"out", text(c.out)},
  };
  return t;
}

// Section order for printing.
constexpr std::array<const char*, 9> kSections = {"geometry", "reward", "env",    "learn", "curriculum",
                                                  "eval",     "verify", "contours", "run"};

}  // namespace

void RunConfig::validate() const {
  try {
    env.validate();
    ppo.validate();
    curriculum.validate(env.reward.alpha);
    eval.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (eval_phase != 1 && eval_phase != 2) throw ConfigError("eval.phase must be 1 or 2", 0, "phase");
  if (verify.oracle_poses < 0 || verify.proposition_poses < 0) {
    throw ConfigError("verify pose counts must be non-negative");
  }
  if (verify.samples_per_pose < 0) throw ConfigError("verify.samples_per_pose must be non-negative", 0, "samples_per_pose");
  if (!(verify.tolerance > 0.0)) throw ConfigError("verify.tolerance must be positive", 0, "tolerance");
  if (!parse_field(contours.field)) {
    throw ConfigError("contours.field must be deviation, goal-centered or distance", 0, "field");
  }
  if (contours.ny < 2 || contours.nz < 2) throw ConfigError("contour resolution must be at least 2x2", 0, "ny");
  if (!(contours.pitch >= env.pitch_min && contours.pitch <= env.pitch_max)) {
    throw ConfigError("contours.pitch must lie within the env pitch range", 0, "pitch");
  }
  if (!(contours.altitude > 0.0)) throw ConfigError("contours.altitude must be positive", 0, "altitude");
  if (out.empty()) throw ConfigError("run.out must not be empty", 0, "out");
}

std::string RunConfig::to_ini() const {
  RunConfig copy = *this;
  Camera cam{env.camera.width, env.camera.height, env.camera.fov};
  const Table t = make_table(copy, cam);
  std::ostringstream os;
  for (const char* s : kSections) {
    os << '[' << s << "]\n";
    for (const auto& [key, field] : t.at(s)) {
      const std::string value = field.get();
      if (!value.empty()) os << key << " = " << value << '\n';  // empty optional strings are omitted
    }
    os << '\n';
  }
  return os.str();
}

namespace {

struct Assignment {
  int line;
  std::string section, key, value;
};

// Applies the assignments (except `skip`) to a default config and validates it.
RunConfig build(const std::vector<Assignment>& assigns, std::size_t skip) {
  RunConfig c;
  Camera cam{c.env.camera.width, c.env.camera.height, c.env.camera.fov};
  Table t = make_table(c, cam);
  for (std::size_t i = 0; i < assigns.size(); ++i) {
    if (i == skip) continue;
    const Assignment& a = assigns[i];
    try {
      t.at(a.section).at(a.key).set(a.value);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("key '" + a.key + "': " + e.what(), a.line, a.key);
    }
  }
  try {
    const RewardConfig reward = c.env.reward;
    c.env.camera = CameraIntrinsics::make(cam.width, cam.height, cam.fov);
    c.env.reward = reward;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("[geometry]: ") + e.what(), 0, "fov");
  }
  c.validate();
  return c;
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  RunConfig defaults;
  Camera cam{defaults.env.camera.width, defaults.env.camera.height, defaults.env.camera.fov};
  const Table t = make_table(defaults, cam);

  std::istringstream is{std::string(text)};
  std::string raw, section;
  std::set<std::string> seen;
  std::vector<Assignment> assigns;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    const auto hash = raw.find_first_of("#;");
    const std::string line = trim(hash == std::string::npos ? std::string_view(raw) : std::string_view(raw).substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", lineno);
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      if (!t.count(section)) throw ConfigError("unknown section [" + section + "]", lineno, section);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value'", lineno);
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' appears before any section", lineno, key);
    if (!t.at(section).count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]", lineno, key);
    if (!seen.insert(section + "." + key).second) {
      throw ConfigError("duplicate key '" + key + "' in [" + section + "]", lineno, key);
    }
    if (value.empty()) throw ConfigError("key '" + key + "' has no value", lineno, key);
    assigns.push_back({lineno, section, key, value});
  }

  const std::size_t none = assigns.size();
  try {
    return build(assigns, none);
  } catch (const ConfigError& e) {
    if (e.line() > 0) throw;
    // Blame the last line whose removal makes the config valid.
    for (std::size_t i = assigns.size(); i-- > 0;) {
      try {
        build(assigns, i);
      } catch (const ConfigError&) {
        continue;
      }
      throw ConfigError(e.what(), assigns[i].line, assigns[i].key);
    }
    throw;
  }
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace vat
