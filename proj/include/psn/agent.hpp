#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "psn/checkpoint.hpp"
#include "psn/env.hpp"

namespace psn {

enum class AgentKind { dqn, bootstrapped_dqn, ddpg, reinforce };
enum class NoiseKind { none, epsilon_greedy, param, gaussian, ou };

std::string to_string(AgentKind kind);
std::string to_string(NoiseKind kind);
AgentKind parse_agent_kind(const std::string& name);
NoiseKind parse_noise_kind(const std::string& name);

struct NoiseConfig {
  NoiseKind kind = NoiseKind::none;
  // param: initial sigma; gaussian/ou: action-space standard deviation
  double sigma = 0.01;
  double alpha = 1.01;
  double delta = 0.05;
  int adapt_interval = 50;  // training steps between distance measurements
  double epsilon_start = 1.0;
  double epsilon_end = 0.1;
  int epsilon_anneal_episodes = 100;
  double residual_epsilon = 0.0;  // extra epsilon-greedy on top of parameter noise
  double ou_theta = 0.15;
  double ou_dt = 1.0;
};

struct AgentConfig {
  AgentKind kind = AgentKind::dqn;
  double gamma = 0.99;
  double learning_rate = 1e-3;  // DQN / REINFORCE
  double actor_lr = 1e-4;       // DDPG
  double critic_lr = 1e-3;      // DDPG
  double critic_l2 = 1e-2;      // DDPG critic weight decay
  double tau = 0.001;           // DDPG soft target update
  int batch_size = 32;
  int target_update = 100;      // DQN hard target copy interval (training steps)
  std::size_t buffer_capacity = 100000;
  int warmup_episodes = 0;
  int warmup_steps = 0;
  int train_frequency = 1;      // environment steps per training step
  std::vector<int> hidden{16, 16};
  bool layer_norm = true;
  bool policy_head = false;     // DQN: add a softmax policy head and perturb it instead of Q
  int heads = 20;               // bootstrapped DQN
  double mask_prob = 0.5;
  int distance_batch = 32;      // states used for the DQN KL measurement
  bool normalize_observations = false;
  int episodes_per_update = 10; // REINFORCE
  NoiseConfig noise;
};

void validate(const AgentConfig& config, const env::EnvSpec& spec);

enum class ActMode { explore, greedy };

class Agent {
public:
  virtual ~Agent() = default;

  virtual env::Action act(std::span<const double> observation, ActMode mode) = 0;

  // Called before every training episode (resamples perturbations, heads, OU state).
  virtual void episode_boundary() = 0;

  // Records a transition and runs any training that is due.
  virtual void observe(const std::vector<double>& state, const env::Action& action, double reward,
                       const std::vector<double>& next_state, bool done) = 0;

  virtual void end_episode() = 0;

  virtual Checkpoint save() const = 0;
  virtual void load(const Checkpoint& checkpoint) = 0;

  // Current parameter-noise scale, NaN when the agent has none.
  virtual double sigma() const { return std::numeric_limits<double>::quiet_NaN(); }
  // Latest measured policy distance, NaN before the first measurement.
  virtual double last_distance() const { return std::numeric_limits<double>::quiet_NaN(); }

  std::uint64_t env_steps() const { return env_steps_; }
  std::uint64_t train_steps() const { return train_steps_; }
  int episodes() const { return episodes_; }

protected:
  std::uint64_t env_steps_ = 0;
  std::uint64_t train_steps_ = 0;
  int episodes_ = 0;
};

std::unique_ptr<Agent> make_agent(const AgentConfig& config, const env::EnvSpec& spec,
                                  std::uint64_t seed);

}  // namespace psn
