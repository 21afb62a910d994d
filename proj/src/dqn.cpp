#include "psn/dqn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "psn/error.hpp"

namespace psn {

namespace {

std::size_t greedy_index(const nn::Matrix& column_out) {
  return argmax(std::span<const double>(column_out.data(), static_cast<std::size_t>(column_out.rows())));
}

HeadedNet build_dqn_net(const AgentConfig& config, int obs_dim, int n_actions, const Rng& root) {
  if (!config.policy_head)
    return HeadedNet(nn::build_mlp(obs_dim, config.hidden, n_actions, nn::Activation::relu,
                                   config.layer_norm, root.split("init-q").seed()));
  const int width = config.hidden.front();
  const std::vector<int> rest(config.hidden.begin() + 1, config.hidden.end());
  std::vector<nn::Network> heads;
  heads.push_back(nn::build_mlp(width, rest, n_actions, nn::Activation::relu, config.layer_norm,
                                root.split("init-q").seed()));
  heads.push_back(nn::build_mlp(width, rest, n_actions, nn::Activation::relu, config.layer_norm,
                                root.split("init-pi").seed()));
  return HeadedNet(nn::build_trunk(obs_dim, {width}, nn::Activation::relu, config.layer_norm,
                                   root.split("init-trunk").seed()),
                   std::move(heads));
}

}  // namespace

double policy_head_loss(std::span<const double> q_values, const DiscretePolicyDist& policy) {
  if (q_values.size() != policy.probs.size() || q_values.empty())
    throw std::invalid_argument("policy_head_loss: length mismatch");
  const double p = policy.probs[argmax(q_values)];
  if (p <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(p);
}

std::vector<double> policy_head_logit_grad(std::span<const double> q_values,
                                           const DiscretePolicyDist& policy) {
  if (q_values.size() != policy.probs.size() || q_values.empty())
    throw std::invalid_argument("policy_head_logit_grad: length mismatch");
  std::vector<double> g = policy.probs;
  g[argmax(q_values)] -= 1.0;
  return g;
}

std::size_t majority_vote(std::span<const std::size_t> votes, std::size_t n_actions) {
  if (votes.empty() || n_actions == 0) throw std::invalid_argument("majority_vote: no votes");
  std::vector<std::size_t> counts(n_actions, 0);
  for (std::size_t v : votes) {
    if (v >= n_actions) throw std::out_of_range("majority_vote: action out of range");
    ++counts[v];
  }
  return static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

// --- DqnBase ------------------------------------------------------------------

DqnBase::DqnBase(const AgentConfig& config, const env::EnvSpec& spec, std::uint64_t seed)
    : config_(config),
      spec_(spec),
      n_actions_(spec.action_space.n),
      act_rng_(Rng(seed).split("action")),
      replay_rng_(Rng(seed).split("replay")),
      perturb_rng_(Rng(seed).split("perturb")),
      mask_rng_(Rng(seed).split("mask")),
      replay_(config.buffer_capacity) {
  validate(config, spec);
  if (!spec.action_space.is_discrete())
    throw std::invalid_argument("DQN agents need a discrete action space");
}

bool DqnBase::training_due() const {
  return episodes_ >= config_.warmup_episodes &&
         env_steps_ >= static_cast<std::uint64_t>(config_.warmup_steps) &&
         replay_.size() >= static_cast<std::size_t>(config_.batch_size) &&
         env_steps_ % static_cast<std::uint64_t>(config_.train_frequency) == 0;
}

void DqnBase::observe(const std::vector<double>& state, const env::Action& action, double reward,
                      const std::vector<double>& next_state, bool done) {
  replay_.push(Transition{state, action, reward, next_state, done, sample_head_mask()});
  ++env_steps_;
  if (training_due() && train_step()) after_train_step();
}

DiscreteBatch DqnBase::sample_batch(std::size_t n) {
  const auto idx = replay_.sample_indices(n, replay_rng_);
  const auto obs_dim = static_cast<Eigen::Index>(spec_.observation_dim);
  DiscreteBatch b;
  b.states.resize(obs_dim, static_cast<Eigen::Index>(n));
  b.next_states.resize(obs_dim, static_cast<Eigen::Index>(n));
  for (std::size_t j = 0; j < n; ++j) {
    const Transition& t = replay_[idx[j]];
    const auto col = static_cast<Eigen::Index>(j);
    b.states.col(col) = Eigen::Map<const nn::Vector>(t.state.data(), obs_dim);
    b.next_states.col(col) = Eigen::Map<const nn::Vector>(t.next_state.data(), obs_dim);
    b.actions.push_back(std::get<int>(t.action));
    b.rewards.push_back(t.reward);
    b.done.push_back(t.done ? 1 : 0);
    b.items.push_back(&t);
  }
  return b;
}

void DqnBase::apply_gradient(std::span<const double> grad) {
  std::vector<double> theta = online_.params();
  adam_.step(theta, grad);
  online_.load(theta);
}

void DqnBase::maybe_sync_target() {
  if (train_steps_ % static_cast<std::uint64_t>(config_.target_update) == 0) target_ = online_;
}

Checkpoint DqnBase::save() const {
  Checkpoint c;
  c.set("agent", to_string(config_.kind));
  c.set("env_steps", std::to_string(env_steps_));
  c.set("train_steps", std::to_string(train_steps_));
  c.set("episodes", std::to_string(episodes_));
  if (online_.has_trunk()) c.add_network("trunk", online_.trunk());
  for (std::size_t i = 0; i < online_.num_heads(); ++i)
    c.add_network("head" + std::to_string(i), online_.head(i));
  return c;
}

void DqnBase::load(const Checkpoint& checkpoint) {
  std::vector<nn::Network> heads;
  for (std::size_t i = 0; i < online_.num_heads(); ++i)
    heads.push_back(checkpoint.network("head" + std::to_string(i)));
  HeadedNet loaded = online_.has_trunk() ? HeadedNet(checkpoint.network("trunk"), std::move(heads))
                                         : HeadedNet(std::move(heads.front()));
  if (loaded.num_params() != online_.num_params() || loaded.input_dim() != online_.input_dim())
    throw std::invalid_argument("checkpoint architecture does not match the agent");
  online_ = loaded;
  target_ = loaded;
}

// --- DqnAgent -----------------------------------------------------------------

DqnAgent::DqnAgent(const AgentConfig& config, const env::EnvSpec& spec, std::uint64_t seed)
    : DqnBase(config, spec, seed), last_distance_(std::numeric_limits<double>::quiet_NaN()) {
  if (config.policy_head && config.hidden.empty())
    throw std::invalid_argument("policy-head DQN needs at least one hidden layer");
  online_ = build_dqn_net(config, spec.observation_dim, n_actions_, Rng(seed));
  target_ = online_;
  acting_ = online_;
  adam_ = nn::AdamState(online_.num_params(), nn::AdamConfig{.learning_rate = config.learning_rate});
  noise_.sigma = config.noise.sigma;
  noise_.alpha = config.noise.alpha;
  noise_.delta = config.noise.delta;
  noise_.adapt_interval = config.noise.adapt_interval;
  if (config.noise.kind == NoiseKind::param) psn::validate(noise_);
}

double DqnAgent::sigma() const {
  return config_.noise.kind == NoiseKind::param ? noise_.sigma
                                                : std::numeric_limits<double>::quiet_NaN();
}

double DqnAgent::epsilon() const {
  return linear_anneal(config_.noise.epsilon_start, config_.noise.epsilon_end, episodes_,
                       config_.noise.epsilon_anneal_episodes);
}

std::vector<double> DqnAgent::q_values(std::span<const double> observation) const {
  const nn::Matrix q = online_.head_output(0, nn::to_column(observation));
  return {q.data(), q.data() + q.size()};
}

std::vector<char> DqnAgent::perturb_mask() const {
  if (config_.policy_head) return online_.head_mask(1);
  return std::vector<char>(online_.num_params(), 1);
}

HeadedNet DqnAgent::perturbed_copy() {
  nn::ParamVector theta;
  theta.values = online_.params();
  const std::vector<char> mask = perturb_mask();
  HeadedNet out = online_;
  out.load(perturb(theta, noise_.sigma, mask, perturb_rng_).values);
  return out;
}

env::Action DqnAgent::act(std::span<const double> observation, ActMode mode) {
  const nn::Matrix x = nn::to_column(observation);
  if (mode == ActMode::greedy) return static_cast<int>(greedy_index(online_.head_output(0, x)));

  switch (config_.noise.kind) {
    case NoiseKind::epsilon_greedy: {
      const nn::Matrix q = online_.head_output(0, x);
      return static_cast<int>(epsilon_greedy_select(
          std::span<const double>(q.data(), static_cast<std::size_t>(q.size())), epsilon(),
          act_rng_));
    }
    case NoiseKind::param: {
      auto a = static_cast<int>(greedy_index(acting_.head_output(exploring_head(), x)));
      if (config_.noise.residual_epsilon > 0.0 && act_rng_.bernoulli(config_.noise.residual_epsilon))
        a = static_cast<int>(act_rng_.index(static_cast<std::size_t>(n_actions_)));
      return a;
    }
    default:
      return static_cast<int>(greedy_index(online_.head_output(0, x)));
  }
}

void DqnAgent::episode_boundary() {
  if (config_.noise.kind == NoiseKind::param) acting_ = perturbed_copy();
}

double DqnAgent::measure_distance() {
  if (replay_.empty()) throw std::logic_error("measure_distance: replay buffer is empty");
  const DiscreteBatch b = sample_batch(static_cast<std::size_t>(config_.distance_batch));
  const HeadedNet candidate = perturbed_copy();
  const std::size_t h = exploring_head();
  return mean_softmax_kl(online_.head_output(h, b.states), candidate.head_output(h, b.states));
}

void DqnAgent::after_train_step() {
  if (config_.noise.kind != NoiseKind::param) return;
  if (train_steps_ % static_cast<std::uint64_t>(noise_.adapt_interval) != 0) return;
  last_distance_ = measure_distance();
  noise_ = adapt_sigma(noise_, last_distance_);
}

std::optional<double> DqnAgent::train_step() {
  const auto batch = static_cast<std::size_t>(config_.batch_size);
  if (replay_.size() < batch) return std::nullopt;
  const DiscreteBatch b = sample_batch(batch);
  const auto n = static_cast<Eigen::Index>(batch);
  const double inv_n = 1.0 / static_cast<double>(batch);

  const nn::Matrix q_next = target_.head_output(0, b.next_states);
  HeadedNet::Tape tape;
  online_.forward(b.states, tape);
  const nn::Matrix& q = tape.outputs[0];

  std::vector<HeadedNet::HeadGradient> grads(online_.num_heads());
  grads[0].output_grad = nn::Matrix::Zero(q.rows(), n);
  double loss = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto s = static_cast<std::size_t>(j);
    double y = b.rewards[s];
    if (!b.done[s]) y += config_.gamma * q_next.col(j).maxCoeff();
    const double err = q(b.actions[s], j) - y;
    loss += err * err * inv_n;
    grads[0].output_grad(b.actions[s], j) = 2.0 * err * inv_n;
  }

  if (config_.policy_head) {
    const nn::Matrix& logits = tape.outputs[1];
    grads[1].output_grad.resize(logits.rows(), n);
    grads[1].through_trunk = false;
    for (Eigen::Index j = 0; j < n; ++j) {
      const std::span<const double> qc(q.col(j).data(), static_cast<std::size_t>(q.rows()));
      const DiscretePolicyDist pi = softmax_policy(
          std::span<const double>(logits.col(j).data(), static_cast<std::size_t>(logits.rows())));
      const std::vector<double> g = policy_head_logit_grad(qc, pi);
      for (Eigen::Index r = 0; r < logits.rows(); ++r)
        grads[1].output_grad(r, j) = g[static_cast<std::size_t>(r)] * inv_n;
    }
  }

  if (!std::isfinite(loss)) throw NumericError("DQN: non-finite TD loss");
  apply_gradient(online_.backward(tape, grads));
  ++train_steps_;
  maybe_sync_target();
  return loss;
}

}  // namespace psn
