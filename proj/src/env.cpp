#include "psn/env.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <optional>
#include <stdexcept>

#include "psn/error.hpp"

namespace psn::env {

ActionSpace ActionSpace::discrete_space(int n) {
  ActionSpace a;
  a.kind = Kind::discrete;
  a.n = n;
  return a;
}

ActionSpace ActionSpace::box(std::vector<double> low, std::vector<double> high) {
  ActionSpace a;
  a.kind = Kind::box;
  a.low = std::move(low);
  a.high = std::move(high);
  return a;
}

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) { validate(spec_); }

void Environment::validate(const EnvSpec& spec) const {
  if (spec.horizon < 1) throw std::invalid_argument(spec.name + ": horizon must be >= 1");
  if (spec.observation_dim < 1) throw std::invalid_argument(spec.name + ": empty observation");
  const auto& a = spec.action_space;
  if (a.is_discrete()) {
    if (a.n < 1) throw std::invalid_argument(spec.name + ": need at least one action");
  } else {
    if (a.low.empty() || a.low.size() != a.high.size())
      throw std::invalid_argument(spec.name + ": malformed box bounds");
    for (std::size_t i = 0; i < a.low.size(); ++i)
      if (!(a.low[i] < a.high[i])) throw std::invalid_argument(spec.name + ": box low >= high");
  }
}

namespace {

int discrete_action(const Action& action, int n) {
  const int* a = std::get_if<int>(&action);
  if (!a) throw std::invalid_argument("expected a discrete action");
  if (*a < 0 || *a >= n) throw std::invalid_argument("discrete action out of range");
  return *a;
}

double scalar_action(const Action& action) {
  const auto* a = std::get_if<std::vector<double>>(&action);
  if (!a || a->size() != 1) throw std::invalid_argument("expected a one-dimensional continuous action");
  if (!std::isfinite((*a)[0])) throw NumericError("non-finite action");
  return (*a)[0];
}

}  // namespace

// --- Chain ------------------------------------------------------------------

ChainTransition chain_step(int state, int action, int n_states) {
  if (n_states < 2) throw std::invalid_argument("chain: need at least two states");
  if (state < 1 || state > n_states) throw std::invalid_argument("chain: state out of range");
  if (action != kLeft && action != kRight) throw std::invalid_argument("chain: invalid action");
  const int next = action == kRight ? std::min(state + 1, n_states) : std::max(state - 1, 1);
  double reward = 0.0;
  if (next == 1) reward = kChainSmallReward;
  if (next == n_states) reward = kChainLargeReward;
  return {next, reward};
}

std::vector<double> chain_observation(int state, int n_states) {
  std::vector<double> obs(static_cast<std::size_t>(n_states), 0.0);
  for (int x = 1; x <= state; ++x) obs[static_cast<std::size_t>(x - 1)] = 1.0;
  return obs;
}

double chain_optimal_return(int n_states, int horizon) {
  if (n_states < 2) throw std::invalid_argument("chain_optimal_return: need at least two states");
  if (horizon < 0) throw std::invalid_argument("chain_optimal_return: negative horizon");
  // value[s] = best return from state s with k steps left
  std::vector<double> value(static_cast<std::size_t>(n_states + 1), 0.0), next(value.size());
  for (int k = 1; k <= horizon; ++k) {
    for (int s = 1; s <= n_states; ++s) {
      double best = -1.0;
      for (int a : {kLeft, kRight}) {
        auto t = chain_step(s, a, n_states);
        best = std::max(best, t.reward + value[static_cast<std::size_t>(t.next_state)]);
      }
      next[static_cast<std::size_t>(s)] = best;
    }
    std::swap(value, next);
  }
  return value[2];
}

int chain_default_horizon(int n_states) { return n_states + 9; }

ChainEnv::ChainEnv(int n_states, int horizon)
    : Environment(EnvSpec{"chain-N" + std::to_string(n_states), n_states,
                          ActionSpace::discrete_space(2),
                          horizon > 0 ? horizon : chain_default_horizon(n_states)}),
      n_(n_states) {
  if (n_states < 2) throw std::invalid_argument("chain: need at least two states");
}

std::vector<double> ChainEnv::reset(Rng&) {
  state_ = 2;
  steps_ = 0;
  return chain_observation(state_, n_);
}

StepResult ChainEnv::step(const Action& action) {
  const int a = discrete_action(action, 2);
  auto t = chain_step(state_, a, n_);
  state_ = t.next_state;
  ++steps_;
  StepResult r;
  r.observation = chain_observation(state_, n_);
  r.reward = t.reward;
  r.done = steps_ >= spec_.horizon;
  r.info["state"] = state_;
  return r;
}

// --- Mountain car -------------------------------------------------------------

MountainCarStep mountain_car_step(MountainCarState s, double action) {
  if (!std::isfinite(action)) throw NumericError("mountain car: non-finite action");
  const double force = std::clamp(action, -1.0, 1.0);
  s.velocity += force * kMountainCarPower - 0.0025 * std::cos(3.0 * s.position);
  s.velocity = std::clamp(s.velocity, -kMountainCarMaxSpeed, kMountainCarMaxSpeed);
  s.position += s.velocity;
  s.position = std::clamp(s.position, kMountainCarMinPosition, kMountainCarMaxPosition);
  if (s.position == kMountainCarMinPosition && s.velocity < 0.0) s.velocity = 0.0;
  const bool goal = s.position >= kMountainCarGoal;
  return {s, goal ? 1.0 : 0.0, goal};
}

SparseMountainCar::SparseMountainCar()
    : Environment(EnvSpec{"sparse-mountaincar", 2, ActionSpace::box({-1.0}, {1.0}), 500}) {}

std::vector<double> SparseMountainCar::reset(Rng& rng) {
  state_ = {rng.uniform(-0.6, -0.4), 0.0};
  steps_ = 0;
  return {state_.position, state_.velocity};
}

StepResult SparseMountainCar::step(const Action& action) {
  auto r = mountain_car_step(state_, scalar_action(action));
  state_ = r.state;
  ++steps_;
  StepResult out;
  out.observation = {state_.position, state_.velocity};
  out.reward = r.reward;
  out.done = r.goal || steps_ >= spec_.horizon;
  out.info["goal"] = r.goal ? 1.0 : 0.0;
  return out;
}

// --- Cart-pole swing-up -----------------------------------------------------

double wrap_angle(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(theta + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  return w - std::numbers::pi;
}

CartPoleStep cartpole_swingup_step(CartPoleState s, double action, const CartPoleParams& p) {
  if (!std::isfinite(action) || !std::isfinite(s.x) || !std::isfinite(s.x_dot) ||
      !std::isfinite(s.theta) || !std::isfinite(s.theta_dot))
    throw NumericError("cart-pole: non-finite state or action");
  if (p.substeps < 1) throw std::invalid_argument("cart-pole: substeps must be >= 1");
  const double force = p.force_scale * std::clamp(action, -1.0, 1.0);
  const double total_mass = p.cart_mass + p.pole_mass;
  const double h = p.dt / p.substeps;
  for (int k = 0; k < p.substeps; ++k) {
    const double sin_t = std::sin(s.theta);
    const double cos_t = std::cos(s.theta);
    const double temp =
        (force + p.pole_mass * p.half_length * s.theta_dot * s.theta_dot * sin_t) / total_mass;
    const double theta_acc =
        (p.gravity * sin_t - cos_t * temp) /
        (p.half_length * (4.0 / 3.0 - p.pole_mass * cos_t * cos_t / total_mass));
    const double x_acc = temp - p.pole_mass * p.half_length * theta_acc * cos_t / total_mass;

    // semi-implicit Euler: velocities first, positions with the new velocities
    s.x_dot += h * x_acc;
    s.x += h * s.x_dot;
    s.theta_dot += h * theta_acc;
    s.theta += h * s.theta_dot;
  }

  const double reward = std::cos(s.theta) > p.reward_cos_threshold ? 1.0 : 0.0;
  return {s, reward, std::abs(s.x) > p.track_limit};
}

double cartpole_energy(const CartPoleState& s, const CartPoleParams& p) {
  const double total_mass = p.cart_mass + p.pole_mass;
  const double l = p.half_length;
  const double kinetic = 0.5 * total_mass * s.x_dot * s.x_dot +
                         p.pole_mass * l * s.x_dot * s.theta_dot * std::cos(s.theta) +
                         (2.0 / 3.0) * p.pole_mass * l * l * s.theta_dot * s.theta_dot;
  const double potential = p.pole_mass * p.gravity * l * std::cos(s.theta);
  return kinetic + potential;
}

SparseCartpoleSwingup::SparseCartpoleSwingup(CartPoleParams params)
    : Environment(EnvSpec{"sparse-cartpole-swingup", 4, ActionSpace::box({-1.0}, {1.0}), 500}),
      params_(params) {}

std::vector<double> SparseCartpoleSwingup::reset(Rng&) {
  state_ = CartPoleState{};
  steps_ = 0;
  return {state_.x, state_.x_dot, state_.theta, state_.theta_dot};
}

StepResult SparseCartpoleSwingup::step(const Action& action) {
  auto r = cartpole_swingup_step(state_, scalar_action(action), params_);
  state_ = r.state;
  // keep the angle bounded; pi itself stays pi
  if (state_.theta > std::numbers::pi || state_.theta < -std::numbers::pi)
    state_.theta = wrap_angle(state_.theta);
  ++steps_;
  StepResult out;
  out.observation = {state_.x, state_.x_dot, state_.theta, state_.theta_dot};
  out.reward = r.reward;
  out.done = r.out_of_bounds || steps_ >= spec_.horizon;
  return out;
}

// --- Pendulum ---------------------------------------------------------------

PendulumStep pendulum_step(PendulumState s, double torque) {
  if (!std::isfinite(torque)) throw NumericError("pendulum: non-finite action");
  constexpr double g = 10.0, m = 1.0, l = 1.0, dt = 0.05;
  const double u = std::clamp(torque, -kPendulumMaxTorque, kPendulumMaxTorque);
  const double th = wrap_angle(s.theta);
  const double reward = -(th * th + 0.1 * s.theta_dot * s.theta_dot + 0.001 * u * u);
  double new_dot = s.theta_dot + (3.0 * g / (2.0 * l) * std::sin(s.theta) + 3.0 / (m * l * l) * u) * dt;
  new_dot = std::clamp(new_dot, -kPendulumMaxSpeed, kPendulumMaxSpeed);
  s.theta = wrap_angle(s.theta + new_dot * dt);
  s.theta_dot = new_dot;
  return {s, reward};
}

DensePendulum::DensePendulum()
    : Environment(EnvSpec{"dense-pendulum", 3, ActionSpace::box({-kPendulumMaxTorque}, {kPendulumMaxTorque}),
                          200}) {}

std::vector<double> DensePendulum::reset(Rng& rng) {
  state_ = {rng.uniform(-std::numbers::pi, std::numbers::pi), rng.uniform(-1.0, 1.0)};
  steps_ = 0;
  return {std::cos(state_.theta), std::sin(state_.theta), state_.theta_dot};
}

StepResult DensePendulum::step(const Action& action) {
  auto r = pendulum_step(state_, scalar_action(action));
  state_ = r.state;
  ++steps_;
  StepResult out;
  out.observation = {std::cos(state_.theta), std::sin(state_.theta), state_.theta_dot};
  out.reward = r.reward;
  out.done = steps_ >= spec_.horizon;
  return out;
}

// --- Registry ---------------------------------------------------------------

bool is_chain(const std::string& name) { return name.rfind("chain-N", 0) == 0; }

int chain_length(const std::string& name) {
  if (!is_chain(name)) throw std::invalid_argument("not a chain environment: " + name);
  const char* first = name.data() + 7;
  const char* last = name.data() + name.size();
  int n = 0;
  auto [ptr, ec] = std::from_chars(first, last, n);
  if (ec != std::errc() || ptr != last || n < 2)
    throw std::invalid_argument("bad chain length in '" + name + "'");
  return n;
}

std::unique_ptr<Environment> make_env(const std::string& name) {
  if (is_chain(name)) return std::make_unique<ChainEnv>(chain_length(name));
  if (name == "sparse-mountaincar") return std::make_unique<SparseMountainCar>();
  if (name == "sparse-cartpole-swingup") return std::make_unique<SparseCartpoleSwingup>();
  if (name == "dense-pendulum") return std::make_unique<DensePendulum>();
  throw std::invalid_argument("unknown environment '" + name + "'");
}

std::optional<double> optimal_return(const std::string& name) {
  if (!is_chain(name)) return std::nullopt;
  const int n = chain_length(name);
  return chain_optimal_return(n, chain_default_horizon(n));
}

}  // namespace psn::env
