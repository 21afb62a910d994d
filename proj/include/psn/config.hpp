#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "psn/agent.hpp"

namespace psn {

struct ExperimentConfig {
  std::string env = "chain-N10";
  std::string agent_name = "dqn-egreedy";  // alias naming the agent/noise combination
  AgentConfig agent;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  int max_episodes = 2000;
  long long max_steps = 0;     // 0: no step limit
  int eval_every_steps = 0;    // 0: evaluate after every training episode
  int eval_episodes = 1;
  int solved_streak = 100;
  double solved_tol = 1e-9;
  bool stop_when_solved = true;
  std::string output_dir = "runs/out";
  bool save_checkpoints = true;
  int workers = 1;
};

void validate(const ExperimentConfig& config);

// Defaults for an (env, agent alias) pair; the base for every parsed file.
ExperimentConfig default_config(const std::string& env, const std::string& agent_name);

std::vector<std::string> agent_aliases();

// key = value lines under [experiment], [agent] and [noise]; '#' starts a
// comment. The experiment section must name env and agent. Unknown or
// repeated keys and malformed values throw std::invalid_argument.
// Each override is "section.key=value" and replaces (or adds) that key before
// defaults are resolved.
ExperimentConfig parse_config(const std::string& text,
                              const std::vector<std::string>& overrides = {});
ExperimentConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {});

// Writes every field; parse_config(serialize_config(c)) reproduces c exactly.
std::string serialize_config(const ExperimentConfig& config);

}  // namespace psn
