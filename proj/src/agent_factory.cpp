#include <stdexcept>

#include "psn/agent.hpp"
#include "psn/ddpg.hpp"
#include "psn/dqn.hpp"
#include "psn/reinforce.hpp"

namespace psn {

std::string to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::dqn: return "dqn";
    case AgentKind::bootstrapped_dqn: return "bootstrapped-dqn";
    case AgentKind::ddpg: return "ddpg";
    case AgentKind::reinforce: return "reinforce";
  }
  return "dqn";
}

std::string to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::epsilon_greedy: return "epsilon-greedy";
    case NoiseKind::param: return "param";
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::ou: return "ou";
  }
  return "none";
}

AgentKind parse_agent_kind(const std::string& name) {
  for (auto k : {AgentKind::dqn, AgentKind::bootstrapped_dqn, AgentKind::ddpg, AgentKind::reinforce})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown agent kind '" + name + "'");
}

NoiseKind parse_noise_kind(const std::string& name) {
  for (auto k : {NoiseKind::none, NoiseKind::epsilon_greedy, NoiseKind::param, NoiseKind::gaussian,
                 NoiseKind::ou})
    if (to_string(k) == name) return k;
  throw std::invalid_argument("unknown noise kind '" + name + "'");
}

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::invalid_argument("invalid agent config: " + what);
}

}  // namespace

void validate(const AgentConfig& c, const env::EnvSpec& spec) {
  require(c.gamma >= 0.0 && c.gamma < 1.0, "gamma must lie in [0, 1)");
  require(c.learning_rate > 0.0 && c.actor_lr > 0.0 && c.critic_lr > 0.0,
          "learning rates must be positive");
  require(c.critic_l2 >= 0.0, "critic_l2 must be >= 0");
  require(c.tau >= 0.0 && c.tau <= 1.0, "tau must lie in [0, 1]");
  require(c.batch_size >= 1, "batch_size must be >= 1");
  require(c.target_update >= 1, "target_update must be >= 1");
  require(c.buffer_capacity >= 1, "buffer_capacity must be >= 1");
  require(c.warmup_episodes >= 0 && c.warmup_steps >= 0, "warmup must be >= 0");
  require(c.train_frequency >= 1, "train_frequency must be >= 1");
  for (int h : c.hidden) require(h >= 1, "hidden sizes must be positive");
  require(c.heads >= 1, "heads must be >= 1");
  require(c.mask_prob > 0.0 && c.mask_prob <= 1.0, "mask_prob must lie in (0, 1]");
  require(c.distance_batch >= 1, "distance_batch must be >= 1");
  require(c.episodes_per_update >= 1, "episodes_per_update must be >= 1");

  const NoiseConfig& n = c.noise;
  require(n.adapt_interval >= 1, "adapt_interval must be >= 1");
  require(n.residual_epsilon >= 0.0 && n.residual_epsilon <= 1.0,
          "residual_epsilon must lie in [0, 1]");
  if (n.kind == NoiseKind::param) {
    require(n.sigma > 0.0, "parameter noise needs sigma > 0");
    require(n.alpha > 1.0, "alpha must exceed 1");
    require(n.delta > 0.0, "delta must be positive");
  }
  if (n.kind == NoiseKind::gaussian || n.kind == NoiseKind::ou)
    require(n.sigma >= 0.0, "action noise sigma must be >= 0");
  if (n.kind == NoiseKind::ou) require(n.ou_theta > 0.0 && n.ou_dt > 0.0, "OU theta and dt must be positive");
  if (n.kind == NoiseKind::epsilon_greedy) {
    require(n.epsilon_start >= 0.0 && n.epsilon_start <= 1.0 && n.epsilon_end >= 0.0 &&
                n.epsilon_end <= 1.0,
            "epsilon schedule must stay within [0, 1]");
    require(n.epsilon_anneal_episodes >= 1, "epsilon_anneal_episodes must be >= 1");
  }

  const bool discrete = spec.action_space.is_discrete();
  switch (c.kind) {
    case AgentKind::dqn:
      require(discrete, "dqn needs a discrete action space");
      require(n.kind == NoiseKind::none || n.kind == NoiseKind::epsilon_greedy ||
                  n.kind == NoiseKind::param,
              "dqn supports none, epsilon-greedy or param noise");
      break;
    case AgentKind::bootstrapped_dqn:
      require(discrete, "bootstrapped-dqn needs a discrete action space");
      require(n.kind == NoiseKind::none, "bootstrapped-dqn explores through its heads only");
      break;
    case AgentKind::ddpg:
      require(!discrete, "ddpg needs a continuous action space");
      require(n.kind != NoiseKind::epsilon_greedy, "ddpg does not support epsilon-greedy");
      break;
    case AgentKind::reinforce:
      require(discrete, "reinforce supports discrete action spaces only");
      require(n.kind == NoiseKind::none || n.kind == NoiseKind::param,
              "reinforce supports none or param noise");
      break;
  }
}

std::unique_ptr<Agent> make_agent(const AgentConfig& config, const env::EnvSpec& spec,
                                  std::uint64_t seed) {
  switch (config.kind) {
    case AgentKind::dqn: return std::make_unique<DqnAgent>(config, spec, seed);
    case AgentKind::bootstrapped_dqn: return std::make_unique<BootstrappedDqnAgent>(config, spec, seed);
    case AgentKind::ddpg: return std::make_unique<DdpgAgent>(config, spec, seed);
    case AgentKind::reinforce: return std::make_unique<ReinforceAgent>(config, spec, seed);
  }
  throw std::invalid_argument("unknown agent kind");
}

}  // namespace psn
