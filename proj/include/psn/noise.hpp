#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "psn/nn.hpp"
#include "psn/rng.hpp"

namespace psn {

// Scale of spherical parameter noise plus the rule that rescales it.
struct AdaptiveNoiseState {
  double sigma = 0.01;
  double alpha = 1.01;
  double delta = 0.05;
  int adapt_interval = 50;
};

void validate(const AdaptiveNoiseState& state);

// theta + N(0, sigma^2) on every entry flagged perturbable; theta is untouched.
nn::ParamVector perturb(const nn::ParamVector& theta, double sigma, Rng& rng);
nn::ParamVector perturb(const nn::ParamVector& theta, double sigma, std::span<const char> mask,
                        Rng& rng);

// sigma grows by alpha when the measured distance is at or below delta and
// shrinks by alpha otherwise. An infinite distance counts as "above".
AdaptiveNoiseState adapt_sigma(AdaptiveNoiseState state, double measured_distance);

std::size_t argmax(std::span<const double> values);  // lowest index on ties

std::size_t epsilon_greedy_select(std::span<const double> q_values, double epsilon, Rng& rng);

double linear_anneal(double start, double end, long long t, long long horizon);

std::vector<double> gaussian_action_noise(std::span<const double> action, double sigma,
                                          std::span<const double> low,
                                          std::span<const double> high, Rng& rng);

struct OUState {
  std::vector<double> value;
  std::vector<double> mu;
  double theta = 0.15;
  double sigma = 0.2;
  double dt = 1.0;
};

OUState make_ou(std::size_t dim, double sigma, double theta = 0.15, double dt = 1.0);
void ou_reset(OUState& state);

struct OUStepResult {
  OUState state;
  std::vector<double> noise;
};

// x <- x + theta (mu - x) dt + sigma sqrt(dt) N(0, I)
OUStepResult ou_step(OUState state, Rng& rng);

// Stationary standard deviation of the discretised process above.
double ou_stationary_std(double theta, double sigma, double dt);

}  // namespace psn
