#include "psn/dqn.hpp"

#include <cmath>
#include <stdexcept>

#include "psn/error.hpp"

namespace psn {

BootstrappedDqnAgent::BootstrappedDqnAgent(const AgentConfig& config, const env::EnvSpec& spec,
                                           std::uint64_t seed)
    : DqnBase(config, spec, seed) {
  if (config.hidden.empty())
    throw std::invalid_argument("bootstrapped DQN needs at least one hidden layer");
  const Rng root(seed);
  const int width = config.hidden.front();
  const std::vector<int> rest(config.hidden.begin() + 1, config.hidden.end());
  std::vector<nn::Network> heads;
  for (int k = 0; k < config.heads; ++k)
    heads.push_back(nn::build_mlp(width, rest, n_actions_, nn::Activation::relu, config.layer_norm,
                                  root.split("init-head" + std::to_string(k)).seed()));
  online_ = HeadedNet(nn::build_trunk(spec.observation_dim, {width}, nn::Activation::relu,
                                      config.layer_norm, root.split("init-trunk").seed()),
                      std::move(heads));
  target_ = online_;
  adam_ = nn::AdamState(online_.num_params(), nn::AdamConfig{.learning_rate = config.learning_rate});
}

std::vector<char> BootstrappedDqnAgent::sample_head_mask() {
  std::vector<char> mask(online_.num_heads());
  for (auto& m : mask) m = mask_rng_.bernoulli(config_.mask_prob) ? 1 : 0;
  return mask;
}

std::vector<std::size_t> BootstrappedDqnAgent::head_votes(std::span<const double> observation) const {
  const auto outs = online_.all_outputs(nn::to_column(observation));
  std::vector<std::size_t> votes;
  votes.reserve(outs.size());
  for (const auto& q : outs)
    votes.push_back(argmax(std::span<const double>(q.data(), static_cast<std::size_t>(q.size()))));
  return votes;
}

env::Action BootstrappedDqnAgent::act(std::span<const double> observation, ActMode mode) {
  if (mode == ActMode::greedy)
    return static_cast<int>(
        majority_vote(head_votes(observation), static_cast<std::size_t>(n_actions_)));
  const nn::Matrix q = online_.head_output(active_head_, nn::to_column(observation));
  return static_cast<int>(argmax(std::span<const double>(q.data(), static_cast<std::size_t>(q.size()))));
}

void BootstrappedDqnAgent::episode_boundary() {
  active_head_ = perturb_rng_.index(online_.num_heads());
}

std::optional<double> BootstrappedDqnAgent::train_step() {
  const auto batch = static_cast<std::size_t>(config_.batch_size);
  if (replay_.size() < batch) return std::nullopt;
  const DiscreteBatch b = sample_batch(batch);
  const auto n = static_cast<Eigen::Index>(batch);
  const double inv_n = 1.0 / static_cast<double>(batch);
  const std::size_t k_heads = online_.num_heads();

  const auto q_next = target_.all_outputs(b.next_states);
  HeadedNet::Tape tape;
  online_.forward(b.states, tape);

  std::vector<HeadedNet::HeadGradient> grads(k_heads);
  double loss = 0.0;
  for (std::size_t k = 0; k < k_heads; ++k) {
    const nn::Matrix& q = tape.outputs[k];
    nn::Matrix g = nn::Matrix::Zero(q.rows(), n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto s = static_cast<std::size_t>(j);
      if (!b.items[s]->head_mask[k]) continue;
      double y = b.rewards[s];
      if (!b.done[s]) y += config_.gamma * q_next[k].col(j).maxCoeff();
      const double err = q(b.actions[s], j) - y;
      loss += err * err * inv_n;
      g(b.actions[s], j) = 2.0 * err * inv_n;
    }
    grads[k].output_grad = std::move(g);
  }
  loss /= static_cast<double>(k_heads);

  if (!std::isfinite(loss)) throw NumericError("bootstrapped DQN: non-finite TD loss");
  apply_gradient(online_.backward(tape, grads, 1.0 / static_cast<double>(k_heads)));
  ++train_steps_;
  maybe_sync_target();
  return loss;
}

}  // namespace psn
