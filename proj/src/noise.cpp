#include "psn/noise.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace psn {

void validate(const AdaptiveNoiseState& state) {
  if (!(state.sigma > 0.0)) throw std::invalid_argument("adaptive noise: sigma must be > 0");
  if (!(state.alpha > 1.0)) throw std::invalid_argument("adaptive noise: alpha must be > 1");
  if (!(state.delta > 0.0)) throw std::invalid_argument("adaptive noise: delta must be > 0");
  if (state.adapt_interval < 1)
    throw std::invalid_argument("adaptive noise: adapt_interval must be >= 1");
}

nn::ParamVector perturb(const nn::ParamVector& theta, double sigma, Rng& rng) {
  return perturb(theta, sigma, theta.perturbable, rng);
}

nn::ParamVector perturb(const nn::ParamVector& theta, double sigma, std::span<const char> mask,
                        Rng& rng) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("perturb: sigma must be >= 0");
  if (mask.size() != theta.values.size()) throw std::invalid_argument("perturb: mask length mismatch");
  nn::ParamVector out = theta;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (mask[i]) out.values[i] += sigma * rng.normal();
  return out;
}

AdaptiveNoiseState adapt_sigma(AdaptiveNoiseState state, double measured_distance) {
  if (std::isnan(measured_distance) || measured_distance < 0.0)
    throw std::invalid_argument("adapt_sigma: distance must be >= 0");
  if (measured_distance <= state.delta)
    state.sigma *= state.alpha;
  else
    state.sigma /= state.alpha;
  return state;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t epsilon_greedy_select(std::span<const double> q_values, double epsilon, Rng& rng) {
  if (q_values.empty()) throw std::invalid_argument("epsilon_greedy_select: no actions");
  if (epsilon < 0.0 || epsilon > 1.0)
    throw std::invalid_argument("epsilon_greedy_select: epsilon outside [0, 1]");
  if (epsilon > 0.0 && rng.uniform() < epsilon) return rng.index(q_values.size());
  return argmax(q_values);
}

double linear_anneal(double start, double end, long long t, long long horizon) {
  if (horizon < 1) throw std::invalid_argument("linear_anneal: horizon must be >= 1");
  if (t < 0) throw std::invalid_argument("linear_anneal: t must be >= 0");
  const double frac = std::min(static_cast<double>(t) / static_cast<double>(horizon), 1.0);
  return start + (end - start) * frac;
}

std::vector<double> gaussian_action_noise(std::span<const double> action, double sigma,
                                          std::span<const double> low,
                                          std::span<const double> high, Rng& rng) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("gaussian_action_noise: sigma must be >= 0");
  if (low.size() != action.size() || high.size() != action.size())
    throw std::invalid_argument("gaussian_action_noise: bounds length mismatch");
  std::vector<double> out(action.begin(), action.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] += sigma * rng.normal();
    out[i] = std::clamp(out[i], low[i], high[i]);
  }
  return out;
}

OUState make_ou(std::size_t dim, double sigma, double theta, double dt) {
  if (!(theta > 0.0) || !(sigma >= 0.0) || !(dt > 0.0))
    throw std::invalid_argument("make_ou: invalid parameters");
  OUState s;
  s.value.assign(dim, 0.0);
  s.mu.assign(dim, 0.0);
  s.theta = theta;
  s.sigma = sigma;
  s.dt = dt;
  return s;
}

void ou_reset(OUState& state) { state.value = state.mu; }

OUStepResult ou_step(OUState state, Rng& rng) {
  if (state.value.size() != state.mu.size()) throw std::invalid_argument("ou_step: dim mismatch");
  const double scale = state.sigma * std::sqrt(state.dt);
  for (std::size_t i = 0; i < state.value.size(); ++i) {
    double& x = state.value[i];
    x += state.theta * (state.mu[i] - x) * state.dt + scale * rng.normal();
  }
  std::vector<double> noise = state.value;
  return {std::move(state), std::move(noise)};
}

double ou_stationary_std(double theta, double sigma, double dt) {
  // AR(1) with coefficient (1 - theta dt) and innovation variance sigma^2 dt.
  return sigma * std::sqrt(dt / (2.0 * theta - theta * theta * dt));
}

}  // namespace psn
