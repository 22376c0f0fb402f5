#pragma once

#include "disc/env.hpp"
#include "disc/objectives.hpp"

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace disc {

// Every training hyperparameter plus environment and seed settings. Defaults
// follow the per-mode hyperparameter table; parse_config fills unspecified
// keys from those defaults after the mode is known.
struct TrainConfig {
  Mode mode = Mode::kPpo;
  double clip_epsilon = 0.2;        // 0.4 in disc mode
  int horizon = 2048;               // N
  double gamma = 0.99;
  double lambda = 0.95;
  int epochs = 10;
  int steps_per_epoch = 32;
  double epsilon_b = 0.1;           // batch inclusion band
  int replay_length = 64;           // 1 in ppo mode
  double j_targ = 1e-4;
  double alpha_is_init = 1.0;
  double lr_max = 3e-4;
  double lr_min = 1e-4;
  int total_iterations = 500;
  int eval_episodes = 10;
  bool normalize_advantages = true;
  double max_grad_norm = 0.5;       // <= 0 disables
  bool shared_log_std = false;
  PenaltyKind penalty = PenaltyKind::kIsLoss;
  EnvSpec env;
  std::uint64_t seed = 0;
};

inline Mode mode_from_string(const std::string& s) {
  if (s == "ppo") return Mode::kPpo;
  if (s == "ppo_amber") return Mode::kPpoAmber;
  if (s == "disc") return Mode::kDisc;
  throw std::invalid_argument("unknown mode: " + s);
}

inline std::string to_string(Mode m) {
  switch (m) {
    case Mode::kPpo: return "ppo";
    case Mode::kPpoAmber: return "ppo_amber";
    case Mode::kDisc: return "disc";
  }
  return "ppo";
}

inline std::string to_string(PenaltyKind p) {
  return p == PenaltyKind::kIsLoss ? "is" : "kl";
}

namespace detail {

inline double parse_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not a number: " + v);
  }
  if (pos != v.size())
    throw std::invalid_argument("config key '" + key + "': trailing junk in: " + v);
  return out;
}

inline long parse_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long out;
  try {
    out = std::stol(v, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not an integer: " + v);
  }
  if (pos != v.size())
    throw std::invalid_argument("config key '" + key + "': trailing junk in: " + v);
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw std::invalid_argument("config key '" + key + "': expected true/false: " + v);
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// flat key=value text with '#' comments
inline std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw std::invalid_argument("config line " + std::to_string(line_no) +
                                                 ": empty key");
    if (kv.count(key))
      throw std::invalid_argument("config key '" + key + "' given twice");
    kv[key] = value;
  }
  return kv;
}

inline void validate_config(const TrainConfig& c) {
  auto fail = [](const std::string& key, const std::string& why) {
    throw std::invalid_argument("config key '" + key + "': " + why);
  };
  if (c.clip_epsilon <= 0.0) fail("clip_epsilon", "must be > 0");
  if (c.horizon < 1) fail("horizon", "must be >= 1");
  if (c.gamma <= 0.0 || c.gamma > 1.0) fail("gamma", "must be in (0, 1]");
  if (c.lambda < 0.0 || c.lambda > 1.0) fail("lambda", "must be in [0, 1]");
  if (c.epochs < 1) fail("epochs", "must be >= 1");
  if (c.steps_per_epoch < 1) fail("steps_per_epoch", "must be >= 1");
  if (c.horizon < c.steps_per_epoch)
    fail("horizon", "must be >= steps_per_epoch so mini-batches are nonempty");
  if (c.epsilon_b < 0.0) fail("epsilon_b", "must be >= 0");
  if (c.replay_length < 1) fail("replay_length", "must be >= 1");
  if (c.j_targ <= 0.0) fail("j_targ", "must be > 0");
  if (c.alpha_is_init < 0.0) fail("alpha_is_init", "must be >= 0");
  if (c.lr_max <= 0.0) fail("lr_max", "must be > 0");
  if (c.lr_min < 0.0) fail("lr_min", "must be >= 0");
  if (c.lr_min > c.lr_max) fail("lr_min", "must not exceed lr_max");
  if (c.total_iterations < 1) fail("total_iterations", "must be >= 1");
  if (c.eval_episodes < 1) fail("eval_episodes", "must be >= 1");
  if (c.env.action_dim < 1) fail("env_action_dim", "must be >= 1");
  if (c.env.episode_cap < 1) fail("env_episode_cap", "must be >= 1");
  if (c.env.noise_scale < 0.0) fail("env_noise_scale", "must be >= 0");
}

// Builds a TrainConfig from key=value text. Unspecified keys take the
// per-mode defaults; mode_override, when nonempty, wins over the file's mode.
inline TrainConfig parse_config_text(const std::string& text,
                                     const std::string& mode_override = "") {
  auto kv = parse_key_values(text);

  TrainConfig c;
  if (!mode_override.empty()) {
    c.mode = mode_from_string(mode_override);
    kv.erase("mode");
  } else if (kv.count("mode")) {
    c.mode = mode_from_string(kv["mode"]);
    kv.erase("mode");
  }

  // per-mode defaults
  switch (c.mode) {
    case Mode::kPpo:
      c.clip_epsilon = 0.2;
      c.replay_length = 1;
      c.epsilon_b = 0.0;
      break;
    case Mode::kPpoAmber:
      c.clip_epsilon = 0.2;
      c.replay_length = 64;
      c.epsilon_b = 0.1;
      break;
    case Mode::kDisc:
      c.clip_epsilon = 0.4;
      c.replay_length = 64;
      c.epsilon_b = 0.1;
      break;
  }

  auto take = [&kv](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) return std::pair<bool, std::string>{false, ""};
    std::string v = it->second;
    kv.erase(it);
    return std::pair<bool, std::string>{true, v};
  };

  if (auto [ok, v] = take("clip_epsilon"); ok) c.clip_epsilon = detail::parse_double("clip_epsilon", v);
  if (auto [ok, v] = take("horizon"); ok) c.horizon = static_cast<int>(detail::parse_int("horizon", v));
  if (auto [ok, v] = take("gamma"); ok) c.gamma = detail::parse_double("gamma", v);
  if (auto [ok, v] = take("lambda"); ok) c.lambda = detail::parse_double("lambda", v);
  if (auto [ok, v] = take("epochs"); ok) c.epochs = static_cast<int>(detail::parse_int("epochs", v));
  if (auto [ok, v] = take("steps_per_epoch"); ok) c.steps_per_epoch = static_cast<int>(detail::parse_int("steps_per_epoch", v));
  if (auto [ok, v] = take("epsilon_b"); ok) c.epsilon_b = detail::parse_double("epsilon_b", v);
  if (auto [ok, v] = take("replay_length"); ok) c.replay_length = static_cast<int>(detail::parse_int("replay_length", v));
  if (auto [ok, v] = take("j_targ"); ok) c.j_targ = detail::parse_double("j_targ", v);
  if (auto [ok, v] = take("alpha_is_init"); ok) c.alpha_is_init = detail::parse_double("alpha_is_init", v);
  if (auto [ok, v] = take("lr_max"); ok) c.lr_max = detail::parse_double("lr_max", v);
  if (auto [ok, v] = take("lr_min"); ok) c.lr_min = detail::parse_double("lr_min", v);
  if (auto [ok, v] = take("total_iterations"); ok) c.total_iterations = static_cast<int>(detail::parse_int("total_iterations", v));
  if (auto [ok, v] = take("eval_episodes"); ok) c.eval_episodes = static_cast<int>(detail::parse_int("eval_episodes", v));
  if (auto [ok, v] = take("normalize_advantages"); ok) c.normalize_advantages = detail::parse_bool("normalize_advantages", v);
  if (auto [ok, v] = take("max_grad_norm"); ok) c.max_grad_norm = detail::parse_double("max_grad_norm", v);
  if (auto [ok, v] = take("shared_log_std"); ok) c.shared_log_std = detail::parse_bool("shared_log_std", v);
  if (auto [ok, v] = take("penalty"); ok) {
    if (v == "is") c.penalty = PenaltyKind::kIsLoss;
    else if (v == "kl") c.penalty = PenaltyKind::kKlLoss;
    else throw std::invalid_argument("config key 'penalty': expected is/kl: " + v);
  }
  if (auto [ok, v] = take("env_family"); ok) c.env.family = env_family_from_string(v);
  if (auto [ok, v] = take("env_action_dim"); ok) c.env.action_dim = static_cast<int>(detail::parse_int("env_action_dim", v));
  if (auto [ok, v] = take("env_episode_cap"); ok) c.env.episode_cap = static_cast<int>(detail::parse_int("env_episode_cap", v));
  if (auto [ok, v] = take("env_noise_scale"); ok) c.env.noise_scale = detail::parse_double("env_noise_scale", v);
  if (auto [ok, v] = take("env_seed"); ok) c.env.seed = static_cast<std::uint64_t>(detail::parse_int("env_seed", v));

  if (!kv.empty())
    throw std::invalid_argument("unknown config key: " + kv.begin()->first);

  validate_config(c);
  return c;
}

inline TrainConfig parse_config(const std::string& path,
                                const std::string& mode_override = "") {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), mode_override);
}

// Full round-trippable serialization; parse(serialize(c)) == c.
inline std::string serialize_config(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "mode=" << to_string(c.mode) << "\n";
  out << "clip_epsilon=" << c.clip_epsilon << "\n";
  out << "horizon=" << c.horizon << "\n";
  out << "gamma=" << c.gamma << "\n";
  out << "lambda=" << c.lambda << "\n";
  out << "epochs=" << c.epochs << "\n";
  out << "steps_per_epoch=" << c.steps_per_epoch << "\n";
  out << "epsilon_b=" << c.epsilon_b << "\n";
  out << "replay_length=" << c.replay_length << "\n";
  out << "j_targ=" << c.j_targ << "\n";
  out << "alpha_is_init=" << c.alpha_is_init << "\n";
  out << "lr_max=" << c.lr_max << "\n";
  out << "lr_min=" << c.lr_min << "\n";
  out << "total_iterations=" << c.total_iterations << "\n";
  out << "eval_episodes=" << c.eval_episodes << "\n";
  out << "normalize_advantages=" << (c.normalize_advantages ? "true" : "false") << "\n";
  out << "max_grad_norm=" << c.max_grad_norm << "\n";
  out << "shared_log_std=" << (c.shared_log_std ? "true" : "false") << "\n";
  out << "penalty=" << to_string(c.penalty) << "\n";
  out << "env_family=" << to_string(c.env.family) << "\n";
  out << "env_action_dim=" << c.env.action_dim << "\n";
  out << "env_episode_cap=" << c.env.episode_cap << "\n";
  out << "env_noise_scale=" << c.env.noise_scale << "\n";
  out << "env_seed=" << c.env.seed << "\n";
  return out.str();
}

}  // namespace disc
