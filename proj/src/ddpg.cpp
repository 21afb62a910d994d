#include "psn/ddpg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "psn/distance.hpp"
#include "psn/error.hpp"

namespace psn {

// --- DdpgCritic -----------------------------------------------------------------

DdpgCritic::DdpgCritic(int obs_dim, int action_dim, const std::vector<int>& hidden,
                       bool layer_norm, std::uint64_t seed)
    : action_dim_(action_dim) {
  if (hidden.empty()) throw std::invalid_argument("DdpgCritic: needs at least one hidden layer");
  if (action_dim < 1) throw std::invalid_argument("DdpgCritic: action dimension must be positive");
  const Rng root(seed);
  obs_net_ = nn::build_trunk(obs_dim, {hidden.front()}, nn::Activation::relu, layer_norm,
                             root.split("obs").seed());
  const std::vector<int> rest(hidden.begin() + 1, hidden.end());
  head_net_ = nn::build_mlp(hidden.front() + action_dim, rest, 1, nn::Activation::relu, layer_norm,
                            root.split("head").seed());
}

DdpgCritic::DdpgCritic(nn::Network obs_net, nn::Network head_net)
    : obs_net_(std::move(obs_net)), head_net_(std::move(head_net)) {
  action_dim_ = head_net_.input_dim() - obs_net_.output_dim();
  if (action_dim_ < 1 || head_net_.output_dim() != 1)
    throw std::invalid_argument("DdpgCritic: inconsistent sub-network shapes");
}

nn::Matrix DdpgCritic::value(const nn::Matrix& states, const nn::Matrix& actions) const {
  const nn::Matrix h = obs_net_.forward(states);
  nn::Matrix joined(h.rows() + actions.rows(), h.cols());
  joined << h, actions;
  return head_net_.forward(joined);
}

nn::Matrix DdpgCritic::forward(const nn::Matrix& states, const nn::Matrix& actions,
                               Tape& tape) const {
  if (actions.rows() != action_dim_ || actions.cols() != states.cols())
    throw std::invalid_argument("DdpgCritic: action batch shape mismatch");
  const nn::Matrix h = obs_net_.forward(states, tape.obs);
  nn::Matrix joined(h.rows() + actions.rows(), h.cols());
  joined << h, actions;
  return head_net_.forward(joined, tape.head);
}

void DdpgCritic::backward(const Tape& tape, const nn::Matrix& q_grad,
                          std::vector<double>* param_grad, nn::Matrix* action_grad) const {
  nn::Matrix joined_grad;
  std::vector<double> head_grad;
  head_net_.backward(tape.head, q_grad, param_grad ? &head_grad : nullptr, &joined_grad);
  const Eigen::Index h = obs_net_.output_dim();
  if (action_grad) *action_grad = joined_grad.bottomRows(action_dim_);
  if (param_grad) {
    std::vector<double> obs_grad;
    obs_net_.backward(tape.obs, joined_grad.topRows(h), &obs_grad);
    param_grad->assign(obs_grad.begin(), obs_grad.end());
    param_grad->insert(param_grad->end(), head_grad.begin(), head_grad.end());
  }
}

std::vector<double> DdpgCritic::params() const {
  std::vector<double> out(num_params());
  std::span<double> view(out);
  obs_net_.copy_params_to(view.first(obs_net_.num_params()));
  head_net_.copy_params_to(view.subspan(obs_net_.num_params()));
  return out;
}

void DdpgCritic::load(std::span<const double> values) {
  if (values.size() != num_params()) throw std::invalid_argument("DdpgCritic::load: size mismatch");
  obs_net_.load_params(values.first(obs_net_.num_params()));
  head_net_.load_params(values.subspan(obs_net_.num_params()));
}

std::vector<char> DdpgCritic::hidden_weight_mask() const {
  std::vector<char> mask(num_params(), 0);
  auto mark = [&](const nn::Network& net, std::size_t base, bool skip_last) {
    for (const auto& slot : net.layout().slots) {
      if (slot.tensor != nn::Tensor::weight) continue;
      if (skip_last && slot.layer + 1 == net.layers().size()) continue;
      std::fill_n(mask.begin() + static_cast<std::ptrdiff_t>(base + slot.offset), slot.size, 1);
    }
  };
  mark(obs_net_, 0, false);
  mark(head_net_, obs_net_.num_params(), true);
  return mask;
}

void DdpgCritic::soft_update_from(const DdpgCritic& source, double tau) {
  nn::soft_update(obs_net_, source.obs_net_, tau);
  nn::soft_update(head_net_, source.head_net_, tau);
}

// --- DdpgAgent ------------------------------------------------------------------

DdpgAgent::DdpgAgent(const AgentConfig& config, const env::EnvSpec& spec, std::uint64_t seed)
    : config_(config),
      spec_(spec),
      action_dim_(spec.action_space.dim()),
      act_rng_(Rng(seed).split("action")),
      replay_rng_(Rng(seed).split("replay")),
      perturb_rng_(Rng(seed).split("perturb")),
      normalizer_(static_cast<std::size_t>(spec.observation_dim)),
      replay_(config.buffer_capacity),
      last_distance_(std::numeric_limits<double>::quiet_NaN()) {
  validate(config, spec);
  if (spec.action_space.is_discrete())
    throw std::invalid_argument("DDPG needs a continuous action space");
  if (config.hidden.empty()) throw std::invalid_argument("DDPG needs at least one hidden layer");

  center_.resize(action_dim_);
  half_range_.resize(action_dim_);
  for (int i = 0; i < action_dim_; ++i) {
    const auto k = static_cast<std::size_t>(i);
    center_[i] = 0.5 * (spec.action_space.high[k] + spec.action_space.low[k]);
    half_range_[i] = 0.5 * (spec.action_space.high[k] - spec.action_space.low[k]);
  }

  const Rng root(seed);
  actor_ = nn::build_mlp(spec.observation_dim, config.hidden, action_dim_, nn::Activation::relu,
                         config.layer_norm, root.split("init-actor").seed(), nn::Activation::tanh);
  target_actor_ = actor_;
  perturbed_actor_ = actor_;
  critic_ = DdpgCritic(spec.observation_dim, action_dim_, config.hidden, config.layer_norm,
                       root.split("init-critic").seed());
  target_critic_ = critic_;
  l2_mask_ = critic_.hidden_weight_mask();
  actor_adam_ = nn::AdamState(actor_.num_params(), nn::AdamConfig{.learning_rate = config.actor_lr});
  critic_adam_ =
      nn::AdamState(critic_.num_params(), nn::AdamConfig{.learning_rate = config.critic_lr});

  noise_.sigma = config.noise.sigma;
  noise_.alpha = config.noise.alpha;
  noise_.delta = config.noise.delta;
  noise_.adapt_interval = config.noise.adapt_interval;
  if (config.noise.kind == NoiseKind::param) psn::validate(noise_);
  ou_ = make_ou(static_cast<std::size_t>(action_dim_), config.noise.sigma, config.noise.ou_theta,
                config.noise.ou_dt);
}

double DdpgAgent::sigma() const {
  return config_.noise.kind == NoiseKind::param ? noise_.sigma
                                                : std::numeric_limits<double>::quiet_NaN();
}

std::vector<double> DdpgAgent::normalized(std::span<const double> observation) const {
  if (!config_.normalize_observations) return {observation.begin(), observation.end()};
  return normalizer_.normalize(observation);
}

nn::Matrix DdpgAgent::scaled_actions(const nn::Network& actor, const nn::Matrix& states) const {
  nn::Matrix u = actor.forward(states);
  return (u.array().colwise() * half_range_.array()).colwise() + center_.array();
}

std::vector<double> DdpgAgent::policy_action(std::span<const double> observation) const {
  const nn::Matrix a = scaled_actions(actor_, nn::to_column(normalized(observation)));
  return {a.data(), a.data() + a.size()};
}

env::Action DdpgAgent::act(std::span<const double> observation, ActMode mode) {
  if (mode == ActMode::greedy) return policy_action(observation);
  const auto& low = spec_.action_space.low;
  const auto& high = spec_.action_space.high;
  switch (config_.noise.kind) {
    case NoiseKind::param: {
      const nn::Matrix a = scaled_actions(perturbed_actor_, nn::to_column(normalized(observation)));
      return std::vector<double>(a.data(), a.data() + a.size());
    }
    case NoiseKind::gaussian:
      return gaussian_action_noise(policy_action(observation), config_.noise.sigma, low, high,
                                   act_rng_);
    case NoiseKind::ou: {
      std::vector<double> a = policy_action(observation);
      OUStepResult r = ou_step(std::move(ou_), act_rng_);
      ou_ = std::move(r.state);
      for (std::size_t i = 0; i < a.size(); ++i) a[i] = std::clamp(a[i] + r.noise[i], low[i], high[i]);
      return a;
    }
    default:
      return policy_action(observation);
  }
}

nn::Network DdpgAgent::perturbed_copy(const nn::Network& actor) {
  nn::Network out = actor;
  out.load_params(perturb(nn::get_flat_params(actor), noise_.sigma, perturb_rng_).values);
  return out;
}

void DdpgAgent::episode_boundary() {
  if (config_.noise.kind == NoiseKind::param) perturbed_actor_ = perturbed_copy(actor_);
  if (config_.noise.kind == NoiseKind::ou) ou_reset(ou_);
}

void DdpgAgent::observe(const std::vector<double>& state, const env::Action& action, double reward,
                        const std::vector<double>& next_state, bool done) {
  if (config_.normalize_observations) normalizer_.update(state);
  replay_.push(Transition{state, action, reward, next_state, done, {}});
  ++env_steps_;
  if (env_steps_ >= static_cast<std::uint64_t>(config_.warmup_steps) &&
      env_steps_ % static_cast<std::uint64_t>(config_.train_frequency) == 0)
    train_step();
}

void DdpgAgent::set_critic(DdpgCritic critic) {
  if (critic.num_params() != critic_.num_params())
    throw std::invalid_argument("set_critic: architecture mismatch");
  critic_ = std::move(critic);
  target_critic_ = critic_;
}

std::vector<double> DdpgAgent::actor_loss_gradient(const nn::Matrix& states,
                                                   double* objective) const {
  nn::ForwardTape actor_tape;
  const nn::Matrix u = actor_.forward(states, actor_tape);
  const nn::Matrix a = (u.array().colwise() * half_range_.array()).colwise() + center_.array();
  DdpgCritic::Tape critic_tape;
  const nn::Matrix q = critic_.forward(states, a, critic_tape);
  const double n = static_cast<double>(states.cols());
  if (objective) *objective = q.sum() / n;

  nn::Matrix action_grad;
  critic_.backward(critic_tape, nn::Matrix::Constant(1, states.cols(), -1.0 / n), nullptr,
                   &action_grad);
  const nn::Matrix u_grad = action_grad.array().colwise() * half_range_.array();
  std::vector<double> grad;
  actor_.backward(actor_tape, u_grad, &grad);
  return grad;
}

double DdpgAgent::actor_step(const nn::Matrix& states) {
  double objective = 0.0;
  const auto grad = actor_loss_gradient(states, &objective);
  nn::apply_adam(actor_, actor_adam_, grad);
  return objective;
}

std::optional<DdpgLosses> DdpgAgent::train_step() {
  const auto batch = static_cast<std::size_t>(config_.batch_size);
  if (replay_.size() < batch) return std::nullopt;
  const auto idx = replay_.sample_indices(batch, replay_rng_);
  const auto obs_dim = static_cast<Eigen::Index>(spec_.observation_dim);
  const auto n = static_cast<Eigen::Index>(batch);
  nn::Matrix states(obs_dim, n), next_states(obs_dim, n), actions(action_dim_, n);
  nn::Matrix rewards(1, n), not_done(1, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const Transition& t = replay_[idx[static_cast<std::size_t>(j)]];
    const auto s = normalized(t.state);
    const auto s2 = normalized(t.next_state);
    states.col(j) = Eigen::Map<const nn::Vector>(s.data(), obs_dim);
    next_states.col(j) = Eigen::Map<const nn::Vector>(s2.data(), obs_dim);
    const auto& a = std::get<std::vector<double>>(t.action);
    actions.col(j) = Eigen::Map<const nn::Vector>(a.data(), action_dim_);
    rewards(0, j) = t.reward;
    not_done(0, j) = t.done ? 0.0 : 1.0;
  }

  const nn::Matrix q_next = target_critic_.value(next_states, scaled_actions(target_actor_, next_states));
  const nn::Matrix y = rewards + config_.gamma * not_done.cwiseProduct(q_next);

  DdpgCritic::Tape tape;
  const nn::Matrix q = critic_.forward(states, actions, tape);
  const nn::Matrix err = q - y;
  const double inv_n = 1.0 / static_cast<double>(batch);
  const double critic_loss = err.squaredNorm() * inv_n;
  if (!std::isfinite(critic_loss)) throw NumericError("DDPG: non-finite critic loss");

  std::vector<double> grad;
  critic_.backward(tape, 2.0 * inv_n * err, &grad, nullptr);
  std::vector<double> theta = critic_.params();
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (l2_mask_[i]) grad[i] += config_.critic_l2 * theta[i];
  critic_adam_.step(theta, grad);
  critic_.load(theta);

  const double objective = actor_step(states);

  nn::soft_update(target_actor_, actor_, config_.tau);
  target_critic_.soft_update_from(critic_, config_.tau);
  ++train_steps_;

  if (config_.noise.kind == NoiseKind::param &&
      train_steps_ % static_cast<std::uint64_t>(noise_.adapt_interval) == 0) {
    const nn::Network candidate = perturbed_copy(actor_);
    last_distance_ = action_rms_distance(scaled_actions(actor_, states),
                                         scaled_actions(candidate, states));
    noise_ = adapt_sigma(noise_, last_distance_);
  }
  return DdpgLosses{critic_loss, objective};
}

Checkpoint DdpgAgent::save() const {
  Checkpoint c;
  c.set("agent", to_string(config_.kind));
  c.set("env_steps", std::to_string(env_steps_));
  c.set("train_steps", std::to_string(train_steps_));
  c.set("episodes", std::to_string(episodes_));
  c.add_network("actor", actor_);
  c.add_network("critic_obs", critic_.obs_net());
  c.add_network("critic_head", critic_.head_net());
  c.add_vector("normalizer_count", {static_cast<double>(normalizer_.count())});
  c.add_vector("normalizer_mean", normalizer_.mean());
  c.add_vector("normalizer_variance", normalizer_.variance());
  return c;
}

void DdpgAgent::load(const Checkpoint& checkpoint) {
  const nn::Network& actor = checkpoint.network("actor");
  if (actor.num_params() != actor_.num_params() || actor.input_dim() != actor_.input_dim() ||
      actor.output_dim() != actor_.output_dim())
    throw std::invalid_argument("checkpoint actor does not match the agent");
  DdpgCritic critic(checkpoint.network("critic_obs"), checkpoint.network("critic_head"));
  if (critic.num_params() != critic_.num_params())
    throw std::invalid_argument("checkpoint critic does not match the agent");
  actor_ = actor;
  target_actor_ = actor;
  perturbed_actor_ = actor;
  critic_ = critic;
  target_critic_ = critic;
  const auto& count = checkpoint.vector("normalizer_count");
  if (count.size() != 1) throw std::invalid_argument("checkpoint normalizer count is malformed");
  normalizer_.restore(static_cast<std::uint64_t>(count[0]), checkpoint.vector("normalizer_mean"),
                      checkpoint.vector("normalizer_variance"));
}

}  // namespace psn
