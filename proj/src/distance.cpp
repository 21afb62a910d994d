#include "psn/distance.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace psn {

DiscretePolicyDist softmax_policy(std::span<const double> q_values) {
  if (q_values.empty()) throw std::invalid_argument("softmax_policy: empty input");
  for (double q : q_values)
    if (!std::isfinite(q)) throw std::invalid_argument("softmax_policy: non-finite Q-value");
  return {nn::softmax(q_values)};
}

double kl_divergence(const DiscretePolicyDist& p, const DiscretePolicyDist& q) {
  if (p.probs.size() != q.probs.size()) throw std::invalid_argument("kl_divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.probs.size(); ++i) {
    if (p.probs[i] <= 0.0) continue;
    if (q.probs[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p.probs[i] * std::log(p.probs[i] / q.probs[i]);
  }
  // Rounding can leave a tiny negative sum for p == q.
  return kl < 0.0 ? 0.0 : kl;
}

double epsilon_greedy_kl_threshold(double epsilon, int n_actions) {
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("epsilon_greedy_kl_threshold: epsilon outside [0, 1]");
  if (n_actions < 1) throw std::invalid_argument("epsilon_greedy_kl_threshold: need >= 1 action");
  return -std::log(1.0 - epsilon + epsilon / static_cast<double>(n_actions));
}

double mean_softmax_kl(const nn::Matrix& q, const nn::Matrix& q_tilde) {
  if (q.rows() != q_tilde.rows() || q.cols() != q_tilde.cols())
    throw std::invalid_argument("mean_softmax_kl: shape mismatch");
  if (q.cols() == 0) throw std::invalid_argument("mean_softmax_kl: empty batch");
  double total = 0.0;
  std::vector<double> a(static_cast<std::size_t>(q.rows())), b(a.size());
  for (Eigen::Index c = 0; c < q.cols(); ++c) {
    for (Eigen::Index r = 0; r < q.rows(); ++r) {
      a[static_cast<std::size_t>(r)] = q(r, c);
      b[static_cast<std::size_t>(r)] = q_tilde(r, c);
    }
    total += kl_divergence(softmax_policy(a), softmax_policy(b));
  }
  return total / static_cast<double>(q.cols());
}

double action_rms_distance(const nn::Matrix& actions, const nn::Matrix& actions_tilde) {
  if (actions.rows() != actions_tilde.rows() || actions.cols() != actions_tilde.cols())
    throw std::invalid_argument("action_rms_distance: shape mismatch");
  if (actions.cols() == 0) throw std::invalid_argument("action_rms_distance: empty batch");
  // mean over dims of mean over states == mean over all entries
  return std::sqrt((actions - actions_tilde).array().square().mean());
}

double continuous_policy_distance(const ContinuousPolicy& pi, const ContinuousPolicy& pi_tilde,
                                  const std::vector<std::vector<double>>& states) {
  if (states.empty()) throw std::invalid_argument("continuous_policy_distance: empty batch");
  std::vector<std::vector<double>> a, b;
  a.reserve(states.size());
  b.reserve(states.size());
  for (const auto& s : states) {
    a.push_back(pi(s));
    b.push_back(pi_tilde(s));
  }
  return action_rms_distance(nn::stack_columns(a), nn::stack_columns(b));
}

double continuous_policy_distance(const nn::Network& pi, const nn::Network& pi_tilde,
                                  const std::vector<std::vector<double>>& states) {
  if (states.empty()) throw std::invalid_argument("continuous_policy_distance: empty batch");
  if (pi.input_dim() != pi_tilde.input_dim() || pi.output_dim() != pi_tilde.output_dim())
    throw std::invalid_argument("continuous_policy_distance: policies differ in shape");
  nn::Matrix s = nn::stack_columns(states);
  return action_rms_distance(pi.forward(s), pi_tilde.forward(s));
}

}  // namespace psn
