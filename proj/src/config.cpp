#include "psn/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "psn/checkpoint.hpp"
#include "psn/distance.hpp"
#include "psn/env.hpp"
#include "psn/error.hpp"

namespace psn {

namespace {

struct Alias {
  const char* name;
  AgentKind kind;
  NoiseKind noise;
  bool policy_head;
};

constexpr Alias kAliases[] = {
    {"dqn", AgentKind::dqn, NoiseKind::epsilon_greedy, false},
    {"dqn-egreedy", AgentKind::dqn, NoiseKind::epsilon_greedy, false},
    {"dqn-nonoise", AgentKind::dqn, NoiseKind::none, false},
    {"dqn-paramnoise", AgentKind::dqn, NoiseKind::param, false},
    {"dqn-policyhead", AgentKind::dqn, NoiseKind::param, true},
    {"bootstrapped-dqn", AgentKind::bootstrapped_dqn, NoiseKind::none, false},
    {"ddpg", AgentKind::ddpg, NoiseKind::none, false},
    {"ddpg-nonoise", AgentKind::ddpg, NoiseKind::none, false},
    {"ddpg-paramnoise", AgentKind::ddpg, NoiseKind::param, false},
    {"ddpg-gaussian", AgentKind::ddpg, NoiseKind::gaussian, false},
    {"ddpg-ou", AgentKind::ddpg, NoiseKind::ou, false},
    {"reinforce", AgentKind::reinforce, NoiseKind::none, false},
    {"reinforce-paramnoise", AgentKind::reinforce, NoiseKind::param, false},
};

const Alias& find_alias(const std::string& name) {
  for (const auto& a : kAliases)
    if (name == a.name) return a;
  throw std::invalid_argument("unknown agent '" + name + "'");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(out))
    throw std::invalid_argument("invalid number for '" + key + "': '" + v + "'");
  return out;
}

template <typename Int>
Int parse_integer(const std::string& key, const std::string& v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size() || v.empty())
    throw std::invalid_argument("invalid integer for '" + key + "': '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw std::invalid_argument("invalid boolean for '" + key + "': '" + v + "' (use true/false)");
}

template <typename Int>
std::vector<Int> parse_list(const std::string& key, const std::string& v) {
  std::vector<Int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_integer<Int>(key, trim(item)));
  if (out.empty()) throw std::invalid_argument("empty list for '" + key + "'");
  return out;
}

template <typename Int>
std::string join(const std::vector<Int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(values[i]);
  }
  return out;
}

std::string bool_str(bool b) { return b ? "true" : "false"; }

int action_count(const std::string& env) {
  return env::make_env(env)->spec().action_space.n;
}

// "eps:<epsilon>" resolves to the KL between greedy and epsilon-greedy policies.
double parse_delta(const ExperimentConfig& c, const std::string& v) {
  if (v.rfind("eps:", 0) == 0) {
    const int n = action_count(c.env);
    if (n < 1) throw std::invalid_argument("delta = eps:... needs a discrete action space");
    return epsilon_greedy_kl_threshold(parse_double("noise.delta", v.substr(4)), n);
  }
  return parse_double("noise.delta", v);
}

struct Field {
  const char* section;
  const char* key;
  std::function<void(ExperimentConfig&, const std::string&)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define PSN_DOUBLE(sec, name, member)                                                      \
  Field{sec, name, [](ExperimentConfig& c, const std::string& v) {                         \
          c.member = parse_double(std::string(sec) + "." + name, v);                       \
        },                                                                                 \
        [](const ExperimentConfig& c) { return format_double(c.member); }}
#define PSN_INT(sec, name, member, type)                                                   \
  Field{sec, name, [](ExperimentConfig& c, const std::string& v) {                         \
          c.member = parse_integer<type>(std::string(sec) + "." + name, v);                \
        },                                                                                 \
        [](const ExperimentConfig& c) { return std::to_string(c.member); }}
#define PSN_BOOL(sec, name, member)                                                        \
  Field{sec, name, [](ExperimentConfig& c, const std::string& v) {                         \
          c.member = parse_bool(std::string(sec) + "." + name, v);                         \
        },                                                                                 \
        [](const ExperimentConfig& c) { return bool_str(c.member); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"experiment", "seeds",
            [](ExperimentConfig& c, const std::string& v) {
              c.seeds = parse_list<std::uint64_t>("experiment.seeds", v);
            },
            [](const ExperimentConfig& c) { return join(c.seeds); }},
      PSN_INT("experiment", "max_episodes", max_episodes, int),
      PSN_INT("experiment", "max_steps", max_steps, long long),
      PSN_INT("experiment", "eval_every_steps", eval_every_steps, int),
      PSN_INT("experiment", "eval_episodes", eval_episodes, int),
      PSN_INT("experiment", "solved_streak", solved_streak, int),
      PSN_DOUBLE("experiment", "solved_tol", solved_tol),
      PSN_BOOL("experiment", "stop_when_solved", stop_when_solved),
      Field{"experiment", "output_dir",
            [](ExperimentConfig& c, const std::string& v) { c.output_dir = v; },
            [](const ExperimentConfig& c) { return c.output_dir; }},
      PSN_BOOL("experiment", "save_checkpoints", save_checkpoints),
      PSN_INT("experiment", "workers", workers, int),

      PSN_DOUBLE("agent", "gamma", agent.gamma),
      PSN_DOUBLE("agent", "learning_rate", agent.learning_rate),
      PSN_DOUBLE("agent", "actor_lr", agent.actor_lr),
      PSN_DOUBLE("agent", "critic_lr", agent.critic_lr),
      PSN_DOUBLE("agent", "critic_l2", agent.critic_l2),
      PSN_DOUBLE("agent", "tau", agent.tau),
      PSN_INT("agent", "batch_size", agent.batch_size, int),
      PSN_INT("agent", "target_update", agent.target_update, int),
      PSN_INT("agent", "buffer_capacity", agent.buffer_capacity, std::size_t),
      PSN_INT("agent", "warmup_episodes", agent.warmup_episodes, int),
      PSN_INT("agent", "warmup_steps", agent.warmup_steps, int),
      PSN_INT("agent", "train_frequency", agent.train_frequency, int),
      Field{"agent", "hidden",
            [](ExperimentConfig& c, const std::string& v) {
              c.agent.hidden = parse_list<int>("agent.hidden", v);
            },
            [](const ExperimentConfig& c) { return join(c.agent.hidden); }},
      PSN_BOOL("agent", "layer_norm", agent.layer_norm),
      PSN_BOOL("agent", "policy_head", agent.policy_head),
      PSN_INT("agent", "heads", agent.heads, int),
      PSN_DOUBLE("agent", "mask_prob", agent.mask_prob),
      PSN_INT("agent", "distance_batch", agent.distance_batch, int),
      PSN_BOOL("agent", "normalize_observations", agent.normalize_observations),
      PSN_INT("agent", "episodes_per_update", agent.episodes_per_update, int),

      Field{"noise", "kind",
            [](ExperimentConfig& c, const std::string& v) { c.agent.noise.kind = parse_noise_kind(v); },
            [](const ExperimentConfig& c) { return to_string(c.agent.noise.kind); }},
      PSN_DOUBLE("noise", "sigma", agent.noise.sigma),
      PSN_DOUBLE("noise", "alpha", agent.noise.alpha),
      Field{"noise", "delta",
            [](ExperimentConfig& c, const std::string& v) { c.agent.noise.delta = parse_delta(c, v); },
            [](const ExperimentConfig& c) { return format_double(c.agent.noise.delta); }},
      PSN_INT("noise", "adapt_interval", agent.noise.adapt_interval, int),
      PSN_DOUBLE("noise", "epsilon_start", agent.noise.epsilon_start),
      PSN_DOUBLE("noise", "epsilon_end", agent.noise.epsilon_end),
      PSN_INT("noise", "epsilon_anneal_episodes", agent.noise.epsilon_anneal_episodes, int),
      PSN_DOUBLE("noise", "residual_epsilon", agent.noise.residual_epsilon),
      PSN_DOUBLE("noise", "ou_theta", agent.noise.ou_theta),
      PSN_DOUBLE("noise", "ou_dt", agent.noise.ou_dt),
  };
  return table;
}

#undef PSN_DOUBLE
#undef PSN_INT
#undef PSN_BOOL

using RawConfig = std::map<std::string, std::map<std::string, std::string>>;

RawConfig parse_raw(const std::string& text) {
  RawConfig raw;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw std::invalid_argument(where + "malformed section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "experiment" && section != "agent" && section != "noise")
        throw std::invalid_argument(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(where + "expected 'key = value'");
    if (section.empty()) throw std::invalid_argument(where + "key outside of a section");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) throw std::invalid_argument(where + "empty key or value");
    if (!raw[section].emplace(key, value).second)
      throw std::invalid_argument(where + "duplicate key '" + section + "." + key + "'");
  }
  return raw;
}

void apply_override(RawConfig& raw, const std::string& assignment) {
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq)
    throw std::invalid_argument("override must look like section.key=value: '" + assignment + "'");
  const std::string section = trim(assignment.substr(0, dot));
  const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
  const std::string value = trim(assignment.substr(eq + 1));
  if (section != "experiment" && section != "agent" && section != "noise")
    throw std::invalid_argument("unknown section in override '" + assignment + "'");
  if (key.empty() || value.empty()) throw std::invalid_argument("empty override '" + assignment + "'");
  raw[section][key] = value;
}

}  // namespace

std::vector<std::string> agent_aliases() {
  std::vector<std::string> out;
  for (const auto& a : kAliases) out.emplace_back(a.name);
  return out;
}

ExperimentConfig default_config(const std::string& env_name, const std::string& agent_name) {
  const Alias& alias = find_alias(agent_name);
  const env::EnvSpec spec = env::make_env(env_name)->spec();
  const bool chain = env::is_chain(env_name);
  const bool sparse = env_name.rfind("sparse", 0) == 0;

  ExperimentConfig c;
  c.env = env_name;
  c.agent_name = agent_name;
  c.output_dir = "runs/" + env_name + "-" + agent_name;

  AgentConfig& a = c.agent;
  a.kind = alias.kind;
  a.policy_head = alias.policy_head;
  a.noise.kind = alias.noise;

  switch (alias.kind) {
    case AgentKind::dqn:
    case AgentKind::bootstrapped_dqn:
      a.gamma = chain ? 0.999 : 0.99;
      a.learning_rate = 1e-3;
      a.batch_size = 32;
      a.target_update = 100;
      a.buffer_capacity = 100000;
      a.warmup_episodes = 5;
      a.hidden = {16, 16};
      a.layer_norm = true;
      a.heads = 20;
      a.mask_prob = 0.5;
      a.noise.epsilon_start = 1.0;
      a.noise.epsilon_end = 0.1;
      a.noise.epsilon_anneal_episodes = 100;
      a.noise.sigma = 0.05;
      a.noise.alpha = 1.01;
      a.noise.adapt_interval = 50;
      a.noise.delta = 0.05;
      a.noise.residual_epsilon = chain ? 0.0 : 0.01;
      if (!chain && spec.action_space.is_discrete())
        a.noise.delta = epsilon_greedy_kl_threshold(0.1, spec.action_space.n);
      break;
    case AgentKind::ddpg:
      a.gamma = 0.99;
      a.tau = 0.001;
      a.critic_lr = 1e-3;
      a.actor_lr = 1e-4;
      a.critic_l2 = 1e-2;
      a.batch_size = 128;
      a.buffer_capacity = 100000;
      a.hidden = {64, 64};
      a.layer_norm = true;
      a.normalize_observations = true;
      a.train_frequency = 2;
      a.noise.sigma = sparse ? 0.6 : 0.2;
      a.noise.delta = sparse ? 0.6 : 0.2;
      a.noise.alpha = 1.01;
      a.noise.adapt_interval = 1;
      a.noise.ou_theta = 0.15;
      a.noise.ou_dt = 0.01;
      if (alias.noise == NoiseKind::param) a.noise.sigma = 0.2;
      break;
    case AgentKind::reinforce:
      a.gamma = chain ? 0.999 : 0.99;
      a.learning_rate = 1e-2;
      a.hidden = {16, 16};
      a.layer_norm = true;
      a.episodes_per_update = 10;
      a.noise.sigma = 0.05;
      a.noise.alpha = 1.01;
      a.noise.delta = 0.05;
      a.noise.adapt_interval = 1;
      break;
  }

  if (chain) {
    c.seeds = {1, 2, 3};
    c.max_episodes = 2000;
    c.eval_every_steps = 0;
    c.eval_episodes = 1;
    c.stop_when_solved = true;
  } else {
    c.seeds = {1, 2, 3, 4, 5};
    c.max_episodes = 500;
    c.eval_every_steps = 5000;
    c.eval_episodes = 10;
    c.stop_when_solved = false;
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) throw std::invalid_argument("invalid experiment config: " + what);
  };
  require(!c.seeds.empty(), "at least one seed is required");
  require(c.max_episodes >= 0, "max_episodes must be >= 0");
  require(c.max_steps >= 0, "max_steps must be >= 0");
  require(c.eval_every_steps >= 0, "eval_every_steps must be >= 0");
  require(c.eval_episodes >= 1, "eval_episodes must be >= 1");
  require(c.solved_streak >= 1, "solved_streak must be >= 1");
  require(c.solved_tol >= 0.0, "solved_tol must be >= 0");
  require(c.workers >= 1, "workers must be >= 1");
  require(!c.output_dir.empty(), "output_dir must not be empty");
  validate(c.agent, env::make_env(c.env)->spec());
}

ExperimentConfig parse_config(const std::string& text, const std::vector<std::string>& overrides) {
  RawConfig raw = parse_raw(text);
  for (const auto& o : overrides) apply_override(raw, o);

  auto& exp = raw["experiment"];
  const auto env_it = exp.find("env");
  const auto agent_it = exp.find("agent");
  if (env_it == exp.end() || agent_it == exp.end())
    throw std::invalid_argument("[experiment] must set both env and agent");
  ExperimentConfig c = default_config(env_it->second, agent_it->second);
  exp.erase("env");
  exp.erase("agent");

  for (const auto& [section, entries] : raw) {
    for (const auto& [key, value] : entries) {
      bool known = false;
      for (const auto& f : fields()) {
        if (section == f.section && key == f.key) {
          f.set(c, value);
          known = true;
          break;
        }
      }
      if (!known) throw std::invalid_argument("unknown key '" + section + "." + key + "'");
    }
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), overrides);
}

std::string serialize_config(const ExperimentConfig& c) {
  std::ostringstream out;
  std::string section;
  for (const auto& f : fields()) {
    if (section != f.section) {
      if (!section.empty()) out << '\n';
      section = f.section;
      out << '[' << section << "]\n";
      if (section == "experiment") out << "env = " << c.env << "\nagent = " << c.agent_name << '\n';
    }
    out << f.key << " = " << f.get(c) << '\n';
  }
  return out.str();
}

}  // namespace psn
