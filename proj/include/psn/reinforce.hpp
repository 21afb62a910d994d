#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "psn/agent.hpp"
#include "psn/noise.hpp"
#include "psn/rng.hpp"

namespace psn {

// One rollout of a softmax policy whose parameters were shifted by
// sigma * epsilon for the whole episode.
struct PerturbedEpisode {
  std::vector<double> epsilon;  // standard-normal draw, one per parameter
  std::vector<std::vector<double>> observations;
  std::vector<int> actions;
  std::vector<double> returns;    // discounted return-to-go R_t
  std::vector<double> baselines;  // b_t
};

// R_t = sum_{t' >= t} gamma^(t' - t) r_t'
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

// sum_t grad log pi(a_t | s_t; phi + sigma * eps) (R_t - b_t) for one episode,
// taken with respect to phi. `policy` supplies the architecture (logit outputs).
std::vector<double> perturbed_episode_gradient(const nn::Network& policy,
                                               const nn::ParamVector& mean_params, double sigma,
                                               const PerturbedEpisode& episode);

// Average of the per-episode terms above. Entries outside the perturbable mask
// are never shifted.
nn::ParamVector reinforce_psn_gradient(const nn::Network& policy,
                                       const nn::ParamVector& mean_params, double sigma,
                                       std::span<const PerturbedEpisode> episodes);

// Episodic REINFORCE on a softmax policy over discrete actions. With parameter
// noise each episode runs under its own perturbation and the update uses the
// estimator above; otherwise sigma is 0.
class ReinforceAgent final : public Agent {
public:
  ReinforceAgent(const AgentConfig& config, const env::EnvSpec& spec, std::uint64_t seed);

  env::Action act(std::span<const double> observation, ActMode mode) override;
  void episode_boundary() override;
  void observe(const std::vector<double>& state, const env::Action& action, double reward,
               const std::vector<double>& next_state, bool done) override;
  void end_episode() override;

  Checkpoint save() const override;
  void load(const Checkpoint& checkpoint) override;

  double sigma() const override;
  double last_distance() const override { return last_distance_; }

  const nn::Network& policy() const { return policy_; }
  std::vector<double> action_probs(std::span<const double> observation) const;

private:
  double current_sigma() const;
  void update();

  AgentConfig config_;
  env::EnvSpec spec_;
  Rng act_rng_;
  Rng perturb_rng_;
  nn::Network policy_;
  nn::Network acting_;
  nn::AdamState adam_;
  AdaptiveNoiseState noise_;
  double last_distance_;
  PerturbedEpisode current_;
  std::vector<double> rewards_;
  std::vector<PerturbedEpisode> pending_;
  std::vector<double> baseline_;  // running mean return-to-go per time step
  std::uint64_t updates_ = 0;
};

}  // namespace psn
