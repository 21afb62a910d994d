#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "psn/agent.hpp"
#include "psn/distance.hpp"
#include "psn/headed_net.hpp"
#include "psn/noise.hpp"
#include "psn/replay.hpp"
#include "psn/rng.hpp"

namespace psn {

// Cross-entropy between one-hot(argmax q) and the policy head's distribution.
double policy_head_loss(std::span<const double> q_values, const DiscretePolicyDist& policy);

// Gradient of policy_head_loss with respect to the policy head's logits.
std::vector<double> policy_head_logit_grad(std::span<const double> q_values,
                                           const DiscretePolicyDist& policy);

// Action chosen by most voters; ties go to the lowest action index.
std::size_t majority_vote(std::span<const std::size_t> votes, std::size_t n_actions);

struct DiscreteBatch {
  nn::Matrix states;
  nn::Matrix next_states;
  std::vector<int> actions;
  std::vector<double> rewards;
  std::vector<char> done;
  std::vector<const Transition*> items;
};

// Replay, target network, optimiser and training cadence shared by the DQN variants.
class DqnBase : public Agent {
public:
  void observe(const std::vector<double>& state, const env::Action& action, double reward,
               const std::vector<double>& next_state, bool done) override;
  void end_episode() override { ++episodes_; }

  // One gradient step; nullopt when the buffer holds fewer than batch_size items.
  virtual std::optional<double> train_step() = 0;

  const HeadedNet& online() const { return online_; }
  const HeadedNet& target() const { return target_; }
  const ReplayBuffer& replay() const { return replay_; }
  const AgentConfig& config() const { return config_; }
  int n_actions() const { return n_actions_; }

  Checkpoint save() const override;
  void load(const Checkpoint& checkpoint) override;

protected:
  DqnBase(const AgentConfig& config, const env::EnvSpec& spec, std::uint64_t seed);

  bool training_due() const;
  virtual std::vector<char> sample_head_mask() { return {}; }
  virtual void after_train_step() {}

  DiscreteBatch sample_batch(std::size_t n);
  void apply_gradient(std::span<const double> grad);
  void maybe_sync_target();

  AgentConfig config_;
  env::EnvSpec spec_;
  int n_actions_;
  Rng act_rng_;
  Rng replay_rng_;
  Rng perturb_rng_;
  Rng mask_rng_;
  HeadedNet online_;
  HeadedNet target_;
  nn::AdamState adam_;
  ReplayBuffer replay_;
};

// Single-head DQN, optionally with a softmax policy head trained to imitate the
// greedy Q policy. Parameter noise perturbs Q directly, or only the policy
// head when one is present.
class DqnAgent final : public DqnBase {
public:
  DqnAgent(const AgentConfig& config, const env::EnvSpec& spec, std::uint64_t seed);

  env::Action act(std::span<const double> observation, ActMode mode) override;
  void episode_boundary() override;
  std::optional<double> train_step() override;

  double sigma() const override;
  double last_distance() const override { return last_distance_; }

  std::vector<double> q_values(std::span<const double> observation) const;
  std::vector<double> perturbed_params() const { return acting_.params(); }
  double epsilon() const;

  // Distance between the current policy and a fresh perturbation at the
  // current scale, measured on replayed states.
  double measure_distance();

private:
  std::size_t exploring_head() const { return config_.policy_head ? 1 : 0; }
  std::vector<char> perturb_mask() const;
  HeadedNet perturbed_copy();
  void after_train_step() override;

  HeadedNet acting_;
  AdaptiveNoiseState noise_;
  double last_distance_;
};

// K Q-heads on a shared trunk. Each transition carries a Bernoulli mask that
// decides which heads train on it; one head drives each training episode.
class BootstrappedDqnAgent final : public DqnBase {
public:
  BootstrappedDqnAgent(const AgentConfig& config, const env::EnvSpec& spec, std::uint64_t seed);

  env::Action act(std::span<const double> observation, ActMode mode) override;
  void episode_boundary() override;
  std::optional<double> train_step() override;

  std::size_t active_head() const { return active_head_; }
  std::size_t num_heads() const { return online_.num_heads(); }
  std::vector<std::size_t> head_votes(std::span<const double> observation) const;

private:
  std::vector<char> sample_head_mask() override;

  std::size_t active_head_ = 0;
};

}  // namespace psn
