#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "psn/nn.hpp"

namespace psn {

// Categorical distribution over discrete actions.
struct DiscretePolicyDist {
  std::vector<double> probs;
};

// Max-subtracted softmax; shift-invariant in its input.
DiscretePolicyDist softmax_policy(std::span<const double> q_values);

// KL(p || q) with 0 log 0 = 0. Returns +infinity when p puts mass where q has none.
double kl_divergence(const DiscretePolicyDist& p, const DiscretePolicyDist& q);

// KL between a greedy policy and its epsilon-greedy counterpart.
double epsilon_greedy_kl_threshold(double epsilon, int n_actions);

// Mean over columns of KL(softmax(q[:, b]) || softmax(q_tilde[:, b])).
double mean_softmax_kl(const nn::Matrix& q, const nn::Matrix& q_tilde);

// sqrt(mean over action dims of the batch-mean squared difference).
double action_rms_distance(const nn::Matrix& actions, const nn::Matrix& actions_tilde);

using ContinuousPolicy = std::function<std::vector<double>(std::span<const double>)>;

double continuous_policy_distance(const ContinuousPolicy& pi, const ContinuousPolicy& pi_tilde,
                                  const std::vector<std::vector<double>>& states);
double continuous_policy_distance(const nn::Network& pi, const nn::Network& pi_tilde,
                                  const std::vector<std::vector<double>>& states);

}  // namespace psn
