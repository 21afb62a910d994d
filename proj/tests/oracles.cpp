#include "oracles.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "psn/distance.hpp"
#include "psn/noise.hpp"
#include "psn/reinforce.hpp"

namespace psn::oracle {

nn::Network random_network(Rng& rng, bool layer_norm) {
  const int input = 1 + static_cast<int>(rng.index(5));
  const int depth = 1 + static_cast<int>(rng.index(3));
  std::vector<int> hidden;
  for (int i = 0; i < depth; ++i) hidden.push_back(2 + static_cast<int>(rng.index(7)));
  const int output = 1 + static_cast<int>(rng.index(4));
  const auto hidden_act = rng.bernoulli(0.5) ? nn::Activation::tanh : nn::Activation::relu;
  const nn::Activation outputs[] = {nn::Activation::linear, nn::Activation::tanh,
                                    nn::Activation::softmax};
  const auto out_act = outputs[rng.index(3)];
  nn::Network net = nn::build_mlp(input, hidden, output, hidden_act, layer_norm,
                                  rng.engine()(), out_act);
  std::vector<double> p(net.num_params());
  for (auto& v : p) v = rng.normal() * 0.7;
  net.load_params(p);
  return net;
}

GradientCheck check_gradient(const nn::Network& net, std::span<const double> input,
                             std::span<const double> output_grad, double h) {
  const auto analytic = nn::backward_grads(net, input, output_grad);
  nn::Network probe = net;
  std::vector<double> theta(net.num_params());
  net.copy_params_to(theta);
  auto objective = [&](const std::vector<double>& p) {
    probe.load_params(p);
    const auto out = probe.forward(input);
    double s = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * output_grad[i];
    return s;
  };
  GradientCheck result;
  result.params = theta.size();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    auto plus = theta, minus = theta;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (objective(plus) - objective(minus)) / (2.0 * h);
    const double g = analytic.values[i];
    const double scale = std::max({std::abs(g), std::abs(fd), 1e-6});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(g - fd) / scale);
  }
  return result;
}

Quadrature gauss_hermite(int n) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(double(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
  Quadrature q;
  for (int i = 0; i < n; ++i) {
    q.nodes.push_back(solver.eigenvalues()(i));
    const double v = solver.eigenvectors()(0, i);
    q.weights.push_back(v * v);
  }
  return q;
}

nn::Network two_state_policy() {
  nn::DenseLayer layer;
  layer.weight = nn::Matrix::Zero(2, 2);
  layer.bias = nn::Vector::Zero(2);
  layer.activation = nn::Activation::linear;
  return nn::Network({layer});
}

namespace {

struct Probs {
  double p[2][2];  // p[s][a]
};

Probs policy_probs(std::span<const double> theta) {
  Probs out{};
  for (int s = 0; s < 2; ++s) {
    const double l0 = theta[0 * 2 + s] + theta[4];
    const double l1 = theta[1 * 2 + s] + theta[5];
    const double m = std::max(l0, l1);
    const double e0 = std::exp(l0 - m), e1 = std::exp(l1 - m);
    out.p[s][0] = e0 / (e0 + e1);
    out.p[s][1] = e1 / (e0 + e1);
  }
  return out;
}

void add_score(const Probs& pr, int s, int a, double scale, std::vector<double>& g) {
  for (int k = 0; k < 2; ++k) {
    const double d = (k == a ? 1.0 : 0.0) - pr.p[s][k];
    g[static_cast<std::size_t>(k * 2 + s)] += scale * d;
    g[static_cast<std::size_t>(4 + k)] += scale * d;
  }
}

}  // namespace

double expected_return(const TwoStateMdp& mdp, std::span<const double> theta) {
  const Probs pr = policy_probs(theta);
  double eta = 0.0;
  for (int a0 = 0; a0 < 2; ++a0)
    for (int s1 = 0; s1 < 2; ++s1) {
      const double ps = s1 == 1 ? mdp.to_state1[0][a0] : 1.0 - mdp.to_state1[0][a0];
      for (int a1 = 0; a1 < 2; ++a1)
        eta += pr.p[0][a0] * ps * pr.p[s1][a1] * (mdp.reward[0][a0] + mdp.reward[s1][a1]);
    }
  return eta;
}

std::vector<double> exact_return_gradient(const TwoStateMdp& mdp, std::span<const double> theta) {
  const Probs pr = policy_probs(theta);
  std::vector<double> g(kTwoStateParams, 0.0);
  for (int a0 = 0; a0 < 2; ++a0)
    for (int s1 = 0; s1 < 2; ++s1) {
      const double ps = s1 == 1 ? mdp.to_state1[0][a0] : 1.0 - mdp.to_state1[0][a0];
      for (int a1 = 0; a1 < 2; ++a1) {
        const double w = pr.p[0][a0] * ps * pr.p[s1][a1] *
                         (mdp.reward[0][a0] + mdp.reward[s1][a1]);
        add_score(pr, 0, a0, w, g);
        add_score(pr, s1, a1, w, g);
      }
    }
  return g;
}

std::vector<double> exact_smoothed_gradient(const TwoStateMdp& mdp, std::span<const double> phi,
                                            double sigma, int nodes) {
  const Quadrature q = gauss_hermite(nodes);
  const std::size_t d = kTwoStateParams;
  std::vector<double> total(d, 0.0);
  std::vector<std::size_t> idx(d, 0);
  std::vector<double> theta(d);
  while (true) {
    double w = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      theta[i] = phi[i] + sigma * q.nodes[idx[i]];
      w *= q.weights[idx[i]];
    }
    const auto g = exact_return_gradient(mdp, theta);
    for (std::size_t i = 0; i < d; ++i) total[i] += w * g[i];
    std::size_t k = 0;
    while (k < d && ++idx[k] == static_cast<std::size_t>(nodes)) idx[k++] = 0;
    if (k == d) break;
  }
  return total;
}

MonteCarloGradient sampled_psn_gradient(const TwoStateMdp& mdp, std::span<const double> phi,
                                        double sigma, std::size_t episodes, std::uint64_t seed) {
  const nn::Network policy = two_state_policy();
  nn::Network loaded = policy;
  loaded.load_params(phi);
  const nn::ParamVector mean = nn::get_flat_params(loaded);
  Rng rng(seed);
  const std::size_t d = kTwoStateParams;
  std::vector<double> sum(d, 0.0), sum_sq(d, 0.0);
  std::vector<double> theta(d);
  const std::vector<double> baselines{0.5, 0.3};
  for (std::size_t e = 0; e < episodes; ++e) {
    PerturbedEpisode ep;
    ep.epsilon.resize(d);
    for (std::size_t i = 0; i < d; ++i) {
      ep.epsilon[i] = rng.normal();
      theta[i] = phi[i] + sigma * ep.epsilon[i];
    }
    const Probs pr = policy_probs(theta);
    int s = 0;
    std::vector<double> rewards;
    for (int t = 0; t < 2; ++t) {
      const int a = rng.uniform() < pr.p[s][1] ? 1 : 0;
      ep.observations.push_back({s == 0 ? 1.0 : 0.0, s == 1 ? 1.0 : 0.0});
      ep.actions.push_back(a);
      rewards.push_back(mdp.reward[s][a]);
      s = rng.uniform() < mdp.to_state1[s][a] ? 1 : 0;
    }
    ep.returns = discounted_returns(rewards, 1.0);
    ep.baselines = baselines;
    const auto g = perturbed_episode_gradient(policy, mean, sigma, ep);
    for (std::size_t i = 0; i < d; ++i) {
      sum[i] += g[i];
      sum_sq[i] += g[i] * g[i];
    }
  }
  MonteCarloGradient out;
  const double n = static_cast<double>(episodes);
  for (std::size_t i = 0; i < d; ++i) {
    const double m = sum[i] / n;
    const double var = (sum_sq[i] - n * m * m) / (n - 1.0);
    out.mean.push_back(m);
    out.standard_error.push_back(std::sqrt(std::max(var, 0.0) / n));
  }
  return out;
}

ScalerTrial run_scaler_trial(const std::function<double(double)>& distance, double sigma_star,
                             double sigma0, double alpha, int steps) {
  AdaptiveNoiseState state{sigma0, alpha, distance(sigma_star), 1};
  ScalerTrial trial;
  trial.allowed =
      static_cast<int>(std::ceil(2.0 * std::abs(std::log(sigma_star / sigma0) / std::log(alpha)))) +
      10;
  const double lo = sigma_star / alpha, hi = sigma_star * alpha;
  auto inside = [&](double s) { return s >= lo * (1 - 1e-12) && s <= hi * (1 + 1e-12); };
  if (inside(state.sigma)) trial.adaptations_to_enter = 0;
  for (int k = 1; k <= steps; ++k) {
    state = adapt_sigma(state, distance(state.sigma));
    if (inside(state.sigma)) {
      if (trial.adaptations_to_enter < 0) trial.adaptations_to_enter = k;
    } else if (trial.adaptations_to_enter >= 0) {
      trial.left_band = true;
    }
  }
  return trial;
}

double noisy_policy_distance(double sigma, std::size_t batch, std::uint64_t seed) {
  Rng rng(seed);
  const nn::Network net = nn::build_mlp(3, {16}, 2, nn::Activation::relu, true, seed);
  ContinuousPolicy pi = [&](std::span<const double> s) { return net.forward(s); };
  Rng noise = rng.split("noise");
  ContinuousPolicy pi_tilde = [&](std::span<const double> s) {
    auto a = net.forward(s);
    for (auto& v : a) v += sigma * noise.normal();
    return a;
  };
  std::vector<std::vector<double>> states(batch, std::vector<double>(3));
  for (auto& s : states)
    for (auto& v : s) v = rng.uniform(-2.0, 2.0);
  return continuous_policy_distance(pi, pi_tilde, states);
}

}  // namespace psn::oracle
