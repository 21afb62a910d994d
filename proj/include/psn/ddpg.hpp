#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "psn/agent.hpp"
#include "psn/noise.hpp"
#include "psn/normalizer.hpp"
#include "psn/replay.hpp"
#include "psn/rng.hpp"

namespace psn {

// Q(s, a): the observation passes through one hidden layer, then the action is
// concatenated and the rest of the stack produces a scalar.
class DdpgCritic {
public:
  struct Tape {
    nn::ForwardTape obs;
    nn::ForwardTape head;
  };

  DdpgCritic() = default;
  DdpgCritic(int obs_dim, int action_dim, const std::vector<int>& hidden, bool layer_norm,
             std::uint64_t seed);
  DdpgCritic(nn::Network obs_net, nn::Network head_net);

  int action_dim() const { return action_dim_; }
  const nn::Network& obs_net() const { return obs_net_; }
  const nn::Network& head_net() const { return head_net_; }

  nn::Matrix value(const nn::Matrix& states, const nn::Matrix& actions) const;  // 1 x B
  nn::Matrix forward(const nn::Matrix& states, const nn::Matrix& actions, Tape& tape) const;

  // Parameter gradient (obs net then head) of sum_b q_grad[b] * Q[b], and
  // optionally dQ/da.
  void backward(const Tape& tape, const nn::Matrix& q_grad, std::vector<double>* param_grad,
                nn::Matrix* action_grad) const;

  std::size_t num_params() const { return obs_net_.num_params() + head_net_.num_params(); }
  std::vector<double> params() const;
  void load(std::span<const double> values);
  // Marks weight matrices of every layer except the final output layer.
  std::vector<char> hidden_weight_mask() const;
  void soft_update_from(const DdpgCritic& source, double tau);

private:
  nn::Network obs_net_;
  nn::Network head_net_;
  int action_dim_ = 0;
};

struct DdpgLosses {
  double critic_loss = 0.0;
  double actor_objective = 0.0;  // mean Q(s, pi(s)) on the batch before the actor step
};

class DdpgAgent final : public Agent {
public:
  DdpgAgent(const AgentConfig& config, const env::EnvSpec& spec, std::uint64_t seed);

  env::Action act(std::span<const double> observation, ActMode mode) override;
  void episode_boundary() override;
  void observe(const std::vector<double>& state, const env::Action& action, double reward,
               const std::vector<double>& next_state, bool done) override;
  void end_episode() override { ++episodes_; }

  std::optional<DdpgLosses> train_step();

  Checkpoint save() const override;
  void load(const Checkpoint& checkpoint) override;

  double sigma() const override;
  double last_distance() const override { return last_distance_; }

  // Actor output mapped into the action bounds, for normalised observations.
  nn::Matrix scaled_actions(const nn::Network& actor, const nn::Matrix& states) const;
  std::vector<double> policy_action(std::span<const double> observation) const;

  const nn::Network& actor() const { return actor_; }
  const nn::Network& perturbed_actor() const { return perturbed_actor_; }
  const nn::Network& target_actor() const { return target_actor_; }
  const DdpgCritic& critic() const { return critic_; }
  const DdpgCritic& target_critic() const { return target_critic_; }
  const OnlineNormalizer& normalizer() const { return normalizer_; }
  const ReplayBuffer& replay() const { return replay_; }

  // Replaces the critic; lets tests train the actor against a fixed critic.
  void set_critic(DdpgCritic critic);

  // Gradient of -mean Q(s, pi(s)) with respect to the actor parameters.
  std::vector<double> actor_loss_gradient(const nn::Matrix& states,
                                          double* objective = nullptr) const;

  // Actor step ascending mean Q(s, pi(s)) on the given normalised states.
  double actor_step(const nn::Matrix& states);

private:
  nn::Network perturbed_copy(const nn::Network& actor);
  std::vector<double> normalized(std::span<const double> observation) const;

  AgentConfig config_;
  env::EnvSpec spec_;
  int action_dim_;
  nn::Vector center_;
  nn::Vector half_range_;
  Rng act_rng_;
  Rng replay_rng_;
  Rng perturb_rng_;
  nn::Network actor_;
  nn::Network target_actor_;
  nn::Network perturbed_actor_;
  DdpgCritic critic_;
  DdpgCritic target_critic_;
  std::vector<char> l2_mask_;
  nn::AdamState actor_adam_;
  nn::AdamState critic_adam_;
  OnlineNormalizer normalizer_;
  ReplayBuffer replay_;
  AdaptiveNoiseState noise_;
  OUState ou_;
  double last_distance_;
};

}  // namespace psn
