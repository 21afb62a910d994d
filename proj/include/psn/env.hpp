#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "psn/rng.hpp"

namespace psn::env {

struct ActionSpace {
  enum class Kind { discrete, box };
  Kind kind = Kind::discrete;
  int n = 0;                 // discrete: number of actions
  std::vector<double> low;   // box bounds, one entry per dimension
  std::vector<double> high;

  static ActionSpace discrete_space(int n);
  static ActionSpace box(std::vector<double> low, std::vector<double> high);

  bool is_discrete() const { return kind == Kind::discrete; }
  int dim() const { return is_discrete() ? 1 : static_cast<int>(low.size()); }
};

struct EnvSpec {
  std::string name;
  int observation_dim = 0;
  ActionSpace action_space;
  int horizon = 1;
};

using Action = std::variant<int, std::vector<double>>;

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  bool done = false;  // goal/failure termination or horizon reached
  std::map<std::string, double> info;
};

class Environment {
public:
  virtual ~Environment() = default;

  const EnvSpec& spec() const { return spec_; }
  int elapsed_steps() const { return steps_; }

  virtual std::vector<double> reset(Rng& rng) = 0;
  virtual StepResult step(const Action& action) = 0;

protected:
  explicit Environment(EnvSpec spec);
  void validate(const EnvSpec& spec) const;

  EnvSpec spec_;
  int steps_ = 0;
};

// --- Chain(N) -------------------------------------------------------------

enum ChainAction : int { kLeft = 0, kRight = 1 };

struct ChainTransition {
  int next_state;
  double reward;
};

inline constexpr double kChainSmallReward = 0.001;
inline constexpr double kChainLargeReward = 1.0;

ChainTransition chain_step(int state, int action, int n_states);

// Thermometer encoding: entry x (1-based) is 1 iff x <= state.
std::vector<double> chain_observation(int state, int n_states);

// Best undiscounted return from s2 over `horizon` steps, by backward induction.
double chain_optimal_return(int n_states, int horizon);

int chain_default_horizon(int n_states);

class ChainEnv final : public Environment {
public:
  explicit ChainEnv(int n_states, int horizon = 0);

  std::vector<double> reset(Rng& rng) override;
  StepResult step(const Action& action) override;

  int state() const { return state_; }
  int n_states() const { return n_; }

private:
  int n_;
  int state_ = 2;
};

// --- Sparse mountain car ----------------------------------------------------

struct MountainCarState {
  double position = -0.5;
  double velocity = 0.0;
};

struct MountainCarStep {
  MountainCarState state;
  double reward;
  bool goal;
};

inline constexpr double kMountainCarMinPosition = -1.2;
inline constexpr double kMountainCarMaxPosition = 0.6;
inline constexpr double kMountainCarMaxSpeed = 0.07;
inline constexpr double kMountainCarGoal = 0.45;
inline constexpr double kMountainCarPower = 0.0015;

MountainCarStep mountain_car_step(MountainCarState state, double action);

class SparseMountainCar final : public Environment {
public:
  SparseMountainCar();

  std::vector<double> reset(Rng& rng) override;
  StepResult step(const Action& action) override;

  const MountainCarState& state() const { return state_; }
  void set_state(MountainCarState s) { state_ = s; }

private:
  MountainCarState state_;
};

// --- Sparse cart-pole swing-up ----------------------------------------------

struct CartPoleParams {
  double gravity = 9.8;
  double cart_mass = 1.0;
  double pole_mass = 0.1;
  double half_length = 0.5;
  double force_scale = 10.0;
  double dt = 0.02;
  int substeps = 20;  // semi-implicit Euler steps per control interval
  double track_limit = 2.4;
  double reward_cos_threshold = 0.8;
};

// angle 0 is upright, pi is hanging down.
struct CartPoleState {
  double x = 0.0;
  double x_dot = 0.0;
  double theta = 3.14159265358979323846;
  double theta_dot = 0.0;
};

struct CartPoleStep {
  CartPoleState state;
  double reward;
  bool out_of_bounds;
};

CartPoleStep cartpole_swingup_step(CartPoleState state, double action,
                                   const CartPoleParams& params = {});

// Mechanical energy (kinetic + potential, pole modelled as a uniform rod).
double cartpole_energy(const CartPoleState& s, const CartPoleParams& params = {});

double wrap_angle(double theta);  // into [-pi, pi)

class SparseCartpoleSwingup final : public Environment {
public:
  explicit SparseCartpoleSwingup(CartPoleParams params = {});

  std::vector<double> reset(Rng& rng) override;
  StepResult step(const Action& action) override;

  const CartPoleState& state() const { return state_; }
  void set_state(CartPoleState s) { state_ = s; }

private:
  CartPoleParams params_;
  CartPoleState state_;
};

// --- Dense pendulum ---------------------------------------------------------

struct PendulumState {
  double theta = 0.0;  // 0 is upright
  double theta_dot = 0.0;
};

struct PendulumStep {
  PendulumState state;
  double reward;
};

inline constexpr double kPendulumMaxSpeed = 8.0;
inline constexpr double kPendulumMaxTorque = 2.0;

PendulumStep pendulum_step(PendulumState state, double torque);

class DensePendulum final : public Environment {
public:
  DensePendulum();

  std::vector<double> reset(Rng& rng) override;
  StepResult step(const Action& action) override;

  const PendulumState& state() const { return state_; }
  void set_state(PendulumState s) { state_ = s; }

private:
  PendulumState state_;
};

// Accepts chain-N<k>, sparse-mountaincar, sparse-cartpole-swingup, dense-pendulum.
std::unique_ptr<Environment> make_env(const std::string& name);

bool is_chain(const std::string& name);
int chain_length(const std::string& name);

// Reference optimum for the solved protocol when one is known exactly.
std::optional<double> optimal_return(const std::string& name);

}  // namespace psn::env
