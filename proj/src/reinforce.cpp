#include "psn/reinforce.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "psn/distance.hpp"
#include "psn/error.hpp"

namespace psn {

namespace {

constexpr double kBaselineRate = 0.1;

nn::Network shifted_policy(const nn::Network& policy, const nn::ParamVector& mean_params,
                           double sigma, std::span<const double> epsilon) {
  if (mean_params.values.size() != policy.num_params())
    throw std::invalid_argument("reinforce: parameter count does not match the policy");
  if (epsilon.size() != mean_params.values.size())
    throw std::invalid_argument("reinforce: epsilon length does not match the parameters");
  const bool masked = !mean_params.perturbable.empty();
  std::vector<double> theta = mean_params.values;
  for (std::size_t i = 0; i < theta.size(); ++i)
    if (!masked || mean_params.perturbable[i]) theta[i] += sigma * epsilon[i];
  nn::Network out = policy;
  out.load_params(theta);
  return out;
}

}  // namespace

std::vector<double> discounted_returns(std::span<const double> rewards, double gamma) {
  std::vector<double> out(rewards.size());
  double acc = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    acc = rewards[t] + gamma * acc;
    out[t] = acc;
  }
  return out;
}

std::vector<double> perturbed_episode_gradient(const nn::Network& policy,
                                               const nn::ParamVector& mean_params, double sigma,
                                               const PerturbedEpisode& episode) {
  const std::size_t steps = episode.actions.size();
  if (episode.observations.size() != steps || episode.returns.size() != steps ||
      episode.baselines.size() != steps)
    throw std::invalid_argument("reinforce: episode fields have different lengths");
  if (steps == 0) return std::vector<double>(mean_params.values.size(), 0.0);

  const nn::Network net = shifted_policy(policy, mean_params, sigma, episode.epsilon);
  nn::ForwardTape tape;
  const nn::Matrix logits = net.forward(nn::stack_columns(episode.observations), tape);
  nn::Matrix grad(logits.rows(), logits.cols());
  for (Eigen::Index t = 0; t < logits.cols(); ++t) {
    const auto s = static_cast<std::size_t>(t);
    const DiscretePolicyDist pi = softmax_policy(
        std::span<const double>(logits.col(t).data(), static_cast<std::size_t>(logits.rows())));
    const double advantage = episode.returns[s] - episode.baselines[s];
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
      const double onehot = r == episode.actions[s] ? 1.0 : 0.0;
      grad(r, t) = (onehot - pi.probs[static_cast<std::size_t>(r)]) * advantage;
    }
  }
  std::vector<double> out;
  net.backward(tape, grad, &out);
  return out;
}

nn::ParamVector reinforce_psn_gradient(const nn::Network& policy,
                                       const nn::ParamVector& mean_params, double sigma,
                                       std::span<const PerturbedEpisode> episodes) {
  if (episodes.empty()) throw std::invalid_argument("reinforce_psn_gradient: no episodes");
  if (!(sigma >= 0.0)) throw std::invalid_argument("reinforce_psn_gradient: sigma must be >= 0");
  nn::ParamVector out;
  out.layout = mean_params.layout;
  out.perturbable = mean_params.perturbable;
  out.values.assign(mean_params.values.size(), 0.0);
  for (const auto& ep : episodes) {
    const std::vector<double> g = perturbed_episode_gradient(policy, mean_params, sigma, ep);
    for (std::size_t i = 0; i < g.size(); ++i) out.values[i] += g[i];
  }
  for (double& v : out.values) v /= static_cast<double>(episodes.size());
  return out;
}

// --- ReinforceAgent -------------------------------------------------------------

ReinforceAgent::ReinforceAgent(const AgentConfig& config, const env::EnvSpec& spec,
                               std::uint64_t seed)
    : config_(config),
      spec_(spec),
      act_rng_(Rng(seed).split("action")),
      perturb_rng_(Rng(seed).split("perturb")),
      last_distance_(std::numeric_limits<double>::quiet_NaN()) {
  validate(config, spec);
  if (!spec.action_space.is_discrete())
    throw std::invalid_argument("REINFORCE supports discrete action spaces only");
  policy_ = nn::build_mlp(spec.observation_dim, config.hidden, spec.action_space.n,
                          nn::Activation::relu, config.layer_norm,
                          Rng(seed).split("init-policy").seed());
  acting_ = policy_;
  adam_ = nn::AdamState(policy_.num_params(), nn::AdamConfig{.learning_rate = config.learning_rate});
  noise_.sigma = config.noise.sigma;
  noise_.alpha = config.noise.alpha;
  noise_.delta = config.noise.delta;
  noise_.adapt_interval = config.noise.adapt_interval;
  if (config.noise.kind == NoiseKind::param) psn::validate(noise_);
  current_.epsilon.assign(policy_.num_params(), 0.0);
}

double ReinforceAgent::sigma() const {
  return config_.noise.kind == NoiseKind::param ? noise_.sigma
                                                : std::numeric_limits<double>::quiet_NaN();
}

double ReinforceAgent::current_sigma() const {
  return config_.noise.kind == NoiseKind::param ? noise_.sigma : 0.0;
}

std::vector<double> ReinforceAgent::action_probs(std::span<const double> observation) const {
  return softmax_policy(policy_.forward(observation)).probs;
}

env::Action ReinforceAgent::act(std::span<const double> observation, ActMode mode) {
  if (mode == ActMode::greedy) return static_cast<int>(argmax(policy_.forward(observation)));
  const std::vector<double> p = softmax_policy(acting_.forward(observation)).probs;
  std::discrete_distribution<int> pick(p.begin(), p.end());
  return pick(act_rng_.engine());
}

void ReinforceAgent::episode_boundary() {
  current_ = PerturbedEpisode{};
  rewards_.clear();
  current_.epsilon.resize(policy_.num_params());
  if (config_.noise.kind == NoiseKind::param)
    for (double& e : current_.epsilon) e = perturb_rng_.normal();
  else
    std::fill(current_.epsilon.begin(), current_.epsilon.end(), 0.0);
  acting_ = shifted_policy(policy_, nn::get_flat_params(policy_), current_sigma(),
                           current_.epsilon);
}

void ReinforceAgent::observe(const std::vector<double>& state, const env::Action& action,
                             double reward, const std::vector<double>&, bool) {
  current_.observations.push_back(state);
  current_.actions.push_back(std::get<int>(action));
  rewards_.push_back(reward);
  ++env_steps_;
}

void ReinforceAgent::end_episode() {
  ++episodes_;
  if (current_.actions.empty()) return;
  current_.returns = discounted_returns(rewards_, config_.gamma);
  if (baseline_.size() < current_.returns.size()) baseline_.resize(current_.returns.size(), 0.0);
  current_.baselines.assign(baseline_.begin(),
                            baseline_.begin() + static_cast<std::ptrdiff_t>(current_.returns.size()));
  for (std::size_t t = 0; t < current_.returns.size(); ++t)
    baseline_[t] += kBaselineRate * (current_.returns[t] - baseline_[t]);
  pending_.push_back(std::move(current_));
  current_ = PerturbedEpisode{};
  rewards_.clear();
  if (pending_.size() >= static_cast<std::size_t>(config_.episodes_per_update)) update();
}

void ReinforceAgent::update() {
  const nn::ParamVector phi = nn::get_flat_params(policy_);
  nn::ParamVector g = reinforce_psn_gradient(policy_, phi, current_sigma(), pending_);
  for (double& v : g.values) v = -v;
  nn::apply_adam(policy_, adam_, g.values);
  ++train_steps_;
  ++updates_;

  if (config_.noise.kind == NoiseKind::param &&
      updates_ % static_cast<std::uint64_t>(noise_.adapt_interval) == 0) {
    std::vector<std::vector<double>> states;
    for (const auto& ep : pending_)
      states.insert(states.end(), ep.observations.begin(), ep.observations.end());
    const nn::Matrix batch = nn::stack_columns(states);
    const nn::ParamVector phi_new = nn::get_flat_params(policy_);
    std::vector<double> eps(phi_new.values.size());
    for (double& e : eps) e = perturb_rng_.normal();
    const nn::Network candidate = shifted_policy(policy_, phi_new, noise_.sigma, eps);
    last_distance_ = mean_softmax_kl(policy_.forward(batch), candidate.forward(batch));
    noise_ = adapt_sigma(noise_, last_distance_);
  }
  pending_.clear();
}

Checkpoint ReinforceAgent::save() const {
  Checkpoint c;
  c.set("agent", to_string(config_.kind));
  c.set("env_steps", std::to_string(env_steps_));
  c.set("train_steps", std::to_string(train_steps_));
  c.set("episodes", std::to_string(episodes_));
  c.add_network("policy", policy_);
  c.add_vector("baseline", baseline_);
  return c;
}

void ReinforceAgent::load(const Checkpoint& checkpoint) {
  const nn::Network& net = checkpoint.network("policy");
  if (net.num_params() != policy_.num_params() || net.input_dim() != policy_.input_dim() ||
      net.output_dim() != policy_.output_dim())
    throw std::invalid_argument("checkpoint policy does not match the agent");
  policy_ = net;
  acting_ = net;
  baseline_ = checkpoint.vector("baseline");
}

}  // namespace psn
