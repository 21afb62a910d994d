#include <doctest.h>

#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include <sstream>

#include "psn/agent.hpp"
#include "psn/checkpoint.hpp"
#include "psn/config.hpp"
#include "psn/ddpg.hpp"
#include "psn/distance.hpp"
#include "psn/dqn.hpp"
#include "psn/env.hpp"
#include "psn/experiment.hpp"
#include "psn/noise.hpp"
#include "psn/normalizer.hpp"
#include "psn/reinforce.hpp"
#include "psn/replay.hpp"

using namespace psn;

namespace {

env::EnvSpec toy_discrete(int obs_dim = 1, int n = 2) {
  return env::EnvSpec{"toy", obs_dim, env::ActionSpace::discrete_space(n), 10};
}

env::EnvSpec toy_box(int obs_dim = 1) {
  return env::EnvSpec{"toy-box", obs_dim, env::ActionSpace::box({-1.0}, {1.0}), 10};
}

AgentConfig dqn_config(NoiseKind noise) {
  AgentConfig c;
  c.kind = AgentKind::dqn;
  c.gamma = 0.9;
  c.learning_rate = 1e-2;
  c.batch_size = 1;
  c.target_update = 1;
  c.hidden = {8};
  c.layer_norm = false;
  c.noise.kind = noise;
  return c;
}

double checksum(const std::vector<double>& v) {
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * double(i + 1);
  return s;
}

}  // namespace

TEST_CASE("replay buffer") {
  ReplayBuffer buf(3);
  for (int i = 0; i < 5; ++i) buf.push(Transition{{double(i)}, 0, double(i), {0.0}, false, {}});
  CHECK(buf.size() == 3);
  std::vector<double> stored;
  for (std::size_t i = 0; i < buf.size(); ++i) stored.push_back(buf[i].reward);
  std::sort(stored.begin(), stored.end());
  CHECK(stored == std::vector<double>{2, 3, 4});
  CHECK_THROWS_AS(ReplayBuffer(0), std::invalid_argument);

  SUBCASE("uniform sampling") {
    ReplayBuffer big(100);
    for (int i = 0; i < 100; ++i) big.push(Transition{{0.0}, 0, 0.0, {0.0}, false, {}});
    Rng rng(3);
    std::vector<int> counts(100, 0);
    const int draws = 100000;
    for (int k = 0; k < draws / 100; ++k)
      for (std::size_t i : big.sample_indices(100, rng)) ++counts[i];
    const double p = 0.01;
    const double se = std::sqrt(p * (1 - p) / draws);
    double chi2 = 0.0;
    for (int c : counts) {
      CHECK(std::abs(c / double(draws) - p) < 3.0 * se);
      chi2 += (c - draws * p) * (c - draws * p) / (draws * p);
    }
    CHECK(chi2 < 148.2);  // chi-squared, 99 dof, p = 0.001
  }
}

TEST_CASE("online normalizer matches two-pass statistics") {
  Rng rng(4);
  std::vector<std::vector<double>> xs;
  for (int i = 0; i < 500; ++i) xs.push_back({rng.normal() * 3 + 1, rng.uniform(-10, 10), 5.0});
  OnlineNormalizer norm(3);
  for (const auto& x : xs) norm.update(x);
  for (std::size_t d = 0; d < 3; ++d) {
    double mean = 0.0;
    for (const auto& x : xs) mean += x[d];
    mean /= double(xs.size());
    double var = 0.0;
    for (const auto& x : xs) var += (x[d] - mean) * (x[d] - mean);
    var /= double(xs.size());
    CHECK(std::abs(norm.mean()[d] - mean) < 1e-9);
    CHECK(std::abs(norm.variance()[d] - var) < 1e-9);
  }
  const auto z = norm.normalize(xs[0]);
  CHECK(z[0] == doctest::Approx((xs[0][0] - norm.mean()[0]) / std::sqrt(norm.variance()[0] + 1e-8)));
  CHECK(z[2] == doctest::Approx(0.0));
}

TEST_CASE("policy head loss") {
  CHECK(policy_head_loss(std::vector<double>{0, 1, 0}, {{0.0, 1.0, 0.0}}) == doctest::Approx(0.0));
  CHECK(policy_head_loss(std::vector<double>{0.3, 2, 1, 0}, {{0.25, 0.25, 0.25, 0.25}}) ==
        doctest::Approx(std::log(4.0)).epsilon(1e-14));
  const DiscretePolicyDist pi{{0.1, 0.6, 0.3}};
  const std::vector<double> q{1.0, 0.2, 3.0};
  const std::vector<double> shifted{11.0, 10.2, 13.0};
  CHECK(policy_head_loss(q, pi) == policy_head_loss(shifted, pi));
  // gradient wrt logits is p - onehot(argmax q), checked against finite differences
  const std::vector<double> logits{0.2, -0.4, 0.9};
  const auto g = policy_head_logit_grad(q, softmax_policy(logits));
  for (std::size_t i = 0; i < 3; ++i) {
    auto up = logits, down = logits;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    const double fd = (policy_head_loss(q, softmax_policy(up)) - policy_head_loss(q, softmax_policy(down))) / 2e-6;
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("majority vote") {
  CHECK(majority_vote(std::vector<std::size_t>{1}, 2) == 1);
  CHECK(majority_vote(std::vector<std::size_t>{0, 0, 1}, 2) == 0);
  CHECK(majority_vote(std::vector<std::size_t>{2, 2, 2, 2}, 3) == 2);
  CHECK(majority_vote(std::vector<std::size_t>{1, 0, 1, 0}, 2) == 0);
  CHECK_THROWS(majority_vote(std::vector<std::size_t>{}, 2));
}

TEST_CASE("dqn converges to the Bellman fixed point of a single transition") {
  const auto spec = toy_discrete();
  SUBCASE("bootstrapped target") {
    DqnAgent agent(dqn_config(NoiseKind::none), spec, 1);
    for (int i = 0; i < 6000; ++i) agent.observe({1.0}, 0, 1.0, {1.0}, false);
    const auto q = agent.q_values(std::vector<double>{1.0});
    const double target = 1.0 + 0.9 * std::max(q[0], q[1]);
    CHECK(std::abs(q[0] - target) < 1e-3);
  }
  SUBCASE("terminal transitions do not bootstrap") {
    DqnAgent agent(dqn_config(NoiseKind::none), spec, 2);
    for (int i = 0; i < 3000; ++i) agent.observe({1.0}, 1, 0.5, {1.0}, true);
    CHECK(std::abs(agent.q_values(std::vector<double>{1.0})[1] - 0.5) < 1e-3);
  }
}

TEST_CASE("dqn leaves parameters alone when the TD error is zero") {
  const auto spec = toy_discrete();
  DqnAgent agent(dqn_config(NoiseKind::none), spec, 1);
  Checkpoint c = agent.save();
  for (auto& [name, net] : c.networks) net.load_params(std::vector<double>(net.num_params(), 0.0));
  agent.load(c);
  const auto before = agent.online().params();
  agent.observe({1.0}, 0, 0.0, {1.0}, false);
  const auto loss = agent.train_step();
  REQUIRE(loss.has_value());
  CHECK(*loss == 0.0);
  CHECK(agent.online().params() == before);
}

TEST_CASE("dqn acting") {
  const auto spec = toy_discrete(3, 4);
  const std::vector<double> obs{0.5, -1.0, 2.0};
  SUBCASE("negligible parameter noise explores greedily") {
    auto c = dqn_config(NoiseKind::param);
    c.noise.sigma = 1e-300;
    DqnAgent agent(c, spec, 3);
    Rng rng(1);
    for (int e = 0; e < 20; ++e) {
      agent.episode_boundary();
      std::vector<double> o(3);
      for (auto& v : o) v = rng.normal();
      CHECK(std::get<int>(agent.act(o, ActMode::explore)) == std::get<int>(agent.act(o, ActMode::greedy)));
    }
  }
  SUBCASE("epsilon one is uniform") {
    auto c = dqn_config(NoiseKind::epsilon_greedy);
    c.noise.epsilon_start = c.noise.epsilon_end = 1.0;
    DqnAgent agent(c, spec, 3);
    std::vector<int> counts(4, 0);
    for (int i = 0; i < 10000; ++i) ++counts[std::size_t(std::get<int>(agent.act(obs, ActMode::explore)))];
    for (int n : counts) CHECK(std::abs(n / 10000.0 - 0.25) < 0.02);
  }
  SUBCASE("greedy is deterministic and noise free") {
    auto c = dqn_config(NoiseKind::param);
    c.noise.sigma = 10.0;
    DqnAgent agent(c, spec, 3);
    const int a = std::get<int>(agent.act(obs, ActMode::greedy));
    const auto q = agent.q_values(obs);
    CHECK(std::size_t(a) == argmax(q));
    for (int e = 0; e < 10; ++e) {
      agent.episode_boundary();
      CHECK(std::get<int>(agent.act(obs, ActMode::greedy)) == a);
    }
  }
  SUBCASE("resampling draws a new perturbation") {
    auto c = dqn_config(NoiseKind::param);
    c.noise.sigma = 0.1;
    DqnAgent agent(c, spec, 3);
    agent.episode_boundary();
    const auto first = agent.perturbed_params();
    agent.episode_boundary();
    const auto second = agent.perturbed_params();
    double diff = 0.0;
    for (std::size_t i = 0; i < first.size(); ++i) diff += std::abs(first[i] - second[i]);
    CHECK(diff > 0.0);
  }
}

TEST_CASE("policy-head dqn perturbs only the policy head") {
  auto c = dqn_config(NoiseKind::param);
  c.policy_head = true;
  c.hidden = {8, 8};
  c.noise.sigma = 0.5;
  DqnAgent agent(c, toy_discrete(2, 3), 5);
  agent.episode_boundary();
  const auto theta = agent.online().params();
  const auto tilde = agent.perturbed_params();
  const auto mask = agent.online().head_mask(1);
  std::size_t changed = 0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    if (!mask[i]) CHECK(theta[i] == tilde[i]);
    changed += theta[i] != tilde[i];
  }
  CHECK(changed > 0);

  SUBCASE("the policy head learns the greedy action without touching the trunk") {
    auto cfg = c;
    cfg.noise.kind = NoiseKind::none;
    cfg.batch_size = 4;
    DqnAgent learner(cfg, toy_discrete(2, 3), 6);
    const std::vector<double> s{0.3, 0.7};
    for (int i = 0; i < 2000; ++i) learner.observe(s, 2, 1.0, s, true);
    const auto q = learner.q_values(s);
    const auto pi = softmax_policy(std::span<const double>(
        learner.online().head_output(1, nn::to_column(s)).data(), 3));
    CHECK(argmax(q) == 2);
    CHECK(policy_head_loss(q, pi) < 0.05);
  }
}

TEST_CASE("dqn training never writes the perturbed parameters") {
  auto c = dqn_config(NoiseKind::param);
  c.batch_size = 8;
  c.noise.sigma = 0.05;
  c.noise.adapt_interval = 5;
  env::ChainEnv env(6);
  DqnAgent agent(c, env.spec(), 7);
  Rng rng(1);
  for (int e = 0; e < 30; ++e) {
    agent.episode_boundary();
    const double before = checksum(agent.perturbed_params());
    auto obs = env.reset(rng);
    bool done = false;
    while (!done) {
      const auto a = agent.act(obs, ActMode::explore);
      const auto r = env.step(a);
      agent.observe(obs, a, r.reward, r.observation, r.done);
      obs = r.observation;
      done = r.done;
    }
    agent.end_episode();
    CHECK(checksum(agent.perturbed_params()) == before);
  }
  CHECK(agent.train_steps() > 0);
  CHECK(std::isfinite(agent.last_distance()));
  CHECK(agent.sigma() != 0.05);
}

TEST_CASE("chain q-values stay bounded during training") {
  for (const std::string alias : {"dqn-egreedy", "dqn-paramnoise"}) {
    auto cfg = default_config("chain-N10", alias);
    auto env = env::make_env("chain-N10");
    auto agent = make_agent(cfg.agent, env->spec(), 3);
    auto* dqn = dynamic_cast<DqnAgent*>(agent.get());
    REQUIRE(dqn != nullptr);
    const double bound = env->spec().horizon * 1.0 / (1.0 - cfg.agent.gamma);
    Rng rng(2);
    for (int e = 0; e < 60; ++e) {
      run_training_episode(*agent, *env, rng);
      for (int s = 1; s <= 10; ++s)
        for (double q : dqn->q_values(env::chain_observation(s, 10))) CHECK(std::abs(q) <= bound);
    }
  }
}

TEST_CASE("bootstrapped dqn") {
  AgentConfig c = dqn_config(NoiseKind::none);
  c.kind = AgentKind::bootstrapped_dqn;
  c.hidden = {8, 8};
  c.heads = 5;
  c.mask_prob = 0.5;
  c.batch_size = 4;
  const auto spec = toy_discrete(3, 3);
  const std::vector<double> obs{0.1, 0.2, 0.3};

  SUBCASE("masks are i.i.d. Bernoulli") {
    c.warmup_steps = 1 << 30;
    BootstrappedDqnAgent quiet(c, spec, 1);
    const int n = 4000;
    for (int i = 0; i < n; ++i) quiet.observe(obs, 0, 0.0, obs, false);
    std::vector<int> on(5, 0);
    int both = 0;
    for (std::size_t i = 0; i < quiet.replay().size(); ++i) {
      const auto& m = quiet.replay()[i].head_mask;
      REQUIRE(m.size() == 5);
      for (std::size_t k = 0; k < 5; ++k) on[k] += m[k];
      both += m[0] && m[1];
    }
    const double se = std::sqrt(0.25 / n);
    for (int k : on) CHECK(std::abs(k / double(n) - 0.5) < 3.5 * se);
    CHECK(std::abs(both / double(n) - 0.25) < 3.5 * std::sqrt(0.25 * 0.75 / n));
  }
  SUBCASE("single head votes with itself") {
    c.heads = 1;
    BootstrappedDqnAgent agent(c, spec, 2);
    agent.episode_boundary();
    CHECK(agent.active_head() == 0);
    CHECK(agent.act(obs, ActMode::greedy) == agent.act(obs, ActMode::explore));
  }
  SUBCASE("identical heads agree") {
    BootstrappedDqnAgent agent(c, spec, 3);
    Checkpoint ck = agent.save();
    const nn::Network first = ck.network("head0");
    for (auto& [name, net] : ck.networks)
      if (name.rfind("head", 0) == 0) net = first;
    agent.load(ck);
    const auto votes = agent.head_votes(obs);
    for (std::size_t v : votes) CHECK(v == votes.front());
    CHECK(std::size_t(std::get<int>(agent.act(obs, ActMode::greedy))) == votes.front());
  }
  SUBCASE("explore follows the active head and greedy takes the vote") {
    BootstrappedDqnAgent agent(c, spec, 4);
    std::vector<int> seen(5, 0);
    for (int e = 0; e < 200; ++e) {
      agent.episode_boundary();
      REQUIRE(agent.active_head() < 5);
      ++seen[agent.active_head()];
      const auto votes = agent.head_votes(obs);
      CHECK(std::size_t(std::get<int>(agent.act(obs, ActMode::explore))) == votes[agent.active_head()]);
      CHECK(std::size_t(std::get<int>(agent.act(obs, ActMode::greedy))) == majority_vote(votes, 3));
    }
    for (int k : seen) CHECK(k > 0);
  }
  SUBCASE("masked-out heads do not learn from a transition") {
    c.heads = 2;
    c.mask_prob = 1.0;
    BootstrappedDqnAgent all(c, spec, 5);
    for (int i = 0; i < 500; ++i) all.observe(obs, 1, 1.0, obs, true);
    for (std::size_t v : all.head_votes(obs)) CHECK(v == 1);
  }
}

namespace {

AgentConfig ddpg_config(NoiseKind noise) {
  AgentConfig c;
  c.kind = AgentKind::ddpg;
  c.gamma = 0.99;
  c.batch_size = 8;
  c.hidden = {2, 2};
  c.layer_norm = false;
  c.normalize_observations = false;
  c.noise.kind = noise;
  c.noise.sigma = 0.2;
  c.noise.delta = 0.2;
  c.noise.adapt_interval = 1;
  return c;
}

nn::DenseLayer dense(nn::Matrix w, nn::Vector b, nn::Activation act) {
  nn::DenseLayer l;
  l.weight = std::move(w);
  l.bias = std::move(b);
  l.activation = act;
  return l;
}

// Q(s, a) = -|a - target| with an observation branch that contributes nothing.
DdpgCritic peaked_critic(double target) {
  nn::Network obs({dense(nn::Matrix::Zero(2, 1), nn::Vector::Zero(2), nn::Activation::relu)});
  nn::Matrix w1 = nn::Matrix::Zero(2, 3);
  w1(0, 2) = 1.0;
  w1(1, 2) = -1.0;
  nn::Vector b1(2);
  b1 << -target, target;
  nn::Matrix w2(1, 2);
  w2 << -1.0, -1.0;
  nn::Network head({dense(w1, b1, nn::Activation::relu),
                    dense(w2, nn::Vector::Zero(1), nn::Activation::linear)});
  return DdpgCritic(obs, head);
}

}  // namespace

TEST_CASE("ddpg actor gradient") {
  const auto spec = toy_box(1);
  SUBCASE("matches finite differences of the mean critic value") {
    auto c = ddpg_config(NoiseKind::none);
    c.hidden = {6, 5};
    c.layer_norm = true;
    DdpgAgent agent(c, spec, 2);
    DdpgCritic smooth(1, 1, {6, 5}, true, 77);
    std::vector<double> p = smooth.params();
    Rng rng(1);
    for (auto& v : p) v = rng.normal() * 0.5;
    smooth.load(p);
    agent.set_critic(smooth);
    nn::Matrix states(1, 16);
    for (int j = 0; j < 16; ++j) states(0, j) = rng.uniform(-1.0, 1.0);
    const auto grad = agent.actor_loss_gradient(states);
    nn::Network probe = agent.actor();
    std::vector<double> theta(probe.num_params());
    probe.copy_params_to(theta);
    auto objective = [&](const std::vector<double>& t) {
      probe.load_params(t);
      return -agent.critic().value(states, probe.forward(states)).sum() / 16.0;
    };
    std::vector<double> fd(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
      auto up = theta, down = theta;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      fd[i] = (objective(up) - objective(down)) / 2e-6;
    }
    const double dot = std::inner_product(grad.begin(), grad.end(), fd.begin(), 0.0);
    const double na = std::sqrt(std::inner_product(grad.begin(), grad.end(), grad.begin(), 0.0));
    const double nb = std::sqrt(std::inner_product(fd.begin(), fd.end(), fd.begin(), 0.0));
    REQUIRE(na > 0.0);
    CHECK(1.0 - dot / (na * nb) < 1e-4);
  }
  SUBCASE("ascending a peaked critic moves the policy to the peak") {
    auto c = ddpg_config(NoiseKind::none);
    c.actor_lr = 1e-2;
    DdpgAgent agent(c, spec, 3);
    agent.set_critic(peaked_critic(0.6));
    nn::Matrix states(1, 8);
    for (int j = 0; j < 8; ++j) states(0, j) = -1.0 + j * 0.25;
    const auto gap = [&] {
      double g = 0.0;
      for (int j = 0; j < 8; ++j) g += std::abs(agent.policy_action(std::vector<double>{states(0, j)})[0] - 0.6);
      return g / 8.0;
    };
    const double before = gap();
    for (int i = 0; i < 3000; ++i) agent.actor_step(states);
    CHECK(gap() < 0.05);
    CHECK(gap() < before);
  }
}

TEST_CASE("ddpg training and exploration") {
  const auto spec = toy_box(2);
  Rng rng(5);
  auto fill = [&](DdpgAgent& agent, int n) {
    for (int i = 0; i < n; ++i) {
      const std::vector<double> s{rng.normal(), rng.normal()};
      agent.observe(s, std::vector<double>{rng.uniform(-1, 1)}, rng.uniform(), s, rng.bernoulli(0.1));
    }
  };
  SUBCASE("train step reports finite losses and moves targets softly") {
    auto c = ddpg_config(NoiseKind::none);
    c.warmup_steps = 1 << 30;
    c.tau = 0.0;
    DdpgAgent agent(c, spec, 1);
    CHECK_FALSE(agent.train_step().has_value());
    fill(agent, 20);
    const auto target_before = nn::get_flat_params(agent.target_actor()).values;
    const auto actor_before = nn::get_flat_params(agent.actor()).values;
    const auto losses = agent.train_step();
    REQUIRE(losses.has_value());
    CHECK(std::isfinite(losses->critic_loss));
    CHECK(std::isfinite(losses->actor_objective));
    CHECK(nn::get_flat_params(agent.target_actor()).values == target_before);
    CHECK(nn::get_flat_params(agent.actor()).values != actor_before);
  }
  SUBCASE("tau one copies the online networks") {
    auto c = ddpg_config(NoiseKind::none);
    c.warmup_steps = 1 << 30;
    c.tau = 1.0;
    DdpgAgent agent(c, spec, 1);
    fill(agent, 20);
    agent.train_step();
    CHECK(nn::get_flat_params(agent.target_actor()).values == nn::get_flat_params(agent.actor()).values);
    CHECK(agent.target_critic().params() == agent.critic().params());
  }
  SUBCASE("parameter noise perturbs the actor only and adapts") {
    auto c = ddpg_config(NoiseKind::param);
    DdpgAgent agent(c, spec, 2);
    const auto critic_before = agent.critic().params();
    agent.episode_boundary();
    CHECK(nn::get_flat_params(agent.perturbed_actor()).values != nn::get_flat_params(agent.actor()).values);
    CHECK(agent.critic().params() == critic_before);
    fill(agent, 30);
    CHECK(std::isfinite(agent.last_distance()));
    CHECK(agent.sigma() != 0.2);
    const std::vector<double> s{0.1, 0.2};
    const auto explore = std::get<std::vector<double>>(agent.act(s, ActMode::explore));
    CHECK(explore[0] >= -1.0);
    CHECK(explore[0] <= 1.0);
  }
  SUBCASE("action noise stays within bounds and greedy is noise free") {
    for (NoiseKind k : {NoiseKind::gaussian, NoiseKind::ou}) {
      auto c = ddpg_config(k);
      c.noise.sigma = 3.0;
      DdpgAgent agent(c, spec, 3);
      agent.episode_boundary();
      const std::vector<double> s{0.3, -0.3};
      const auto greedy = std::get<std::vector<double>>(agent.act(s, ActMode::greedy));
      bool differs = false;
      for (int i = 0; i < 50; ++i) {
        const auto a = std::get<std::vector<double>>(agent.act(s, ActMode::explore));
        CHECK(std::abs(a[0]) <= 1.0);
        differs |= a != greedy;
        CHECK(std::get<std::vector<double>>(agent.act(s, ActMode::greedy)) == greedy);
      }
      CHECK(differs);
    }
  }
  SUBCASE("observations feed the normalizer") {
    auto c = ddpg_config(NoiseKind::none);
    c.normalize_observations = true;
    c.warmup_steps = 1 << 30;
    DdpgAgent agent(c, spec, 4);
    fill(agent, 10);
    CHECK(agent.normalizer().count() == 10);
  }
}

TEST_CASE("reinforce estimator") {
  const nn::Network policy = oracle::two_state_policy();
  nn::Network loaded = policy;
  loaded.load_params(std::vector<double>{0.1, -0.2, 0.3, 0.4, -0.1, 0.2});
  const nn::ParamVector mean = nn::get_flat_params(loaded);

  PerturbedEpisode ep;
  ep.epsilon = {0.5, -1.0, 0.2, 0.0, 1.5, -0.3};
  ep.observations = {{1, 0}, {0, 1}};
  ep.actions = {1, 0};
  ep.returns = discounted_returns(std::vector<double>{0.0, 1.0}, 0.9);
  CHECK(ep.returns == std::vector<double>{0.9, 1.0});

  SUBCASE("zero advantages give a zero gradient") {
    ep.baselines = ep.returns;
    for (double g : perturbed_episode_gradient(policy, mean, 0.3, ep)) CHECK(g == 0.0);
  }
  SUBCASE("single-episode term matches the exact score function") {
    ep.baselines = {0.2, 0.1};
    const auto g = perturbed_episode_gradient(policy, mean, 0.3, ep);
    std::vector<double> theta(6);
    for (std::size_t i = 0; i < 6; ++i) theta[i] = mean.values[i] + 0.3 * ep.epsilon[i];
    // d log softmax(W onehot(s) + b)[a] = onehot(a) - p, placed at W[:, s] and b
    std::vector<double> expected(6, 0.0);
    for (int t = 0; t < 2; ++t) {
      const int s = t;
      const double adv = ep.returns[std::size_t(t)] - ep.baselines[std::size_t(t)];
      const double l0 = theta[std::size_t(0 + s)] + theta[4], l1 = theta[std::size_t(2 + s)] + theta[5];
      const double p1 = 1.0 / (1.0 + std::exp(l0 - l1));
      const double p[2] = {1.0 - p1, p1};
      for (int k = 0; k < 2; ++k) {
        const double d = (k == ep.actions[std::size_t(t)] ? 1.0 : 0.0) - p[k];
        expected[std::size_t(k * 2 + s)] += d * adv;
        expected[std::size_t(4 + k)] += d * adv;
      }
    }
    for (std::size_t i = 0; i < 6; ++i) CHECK(g[i] == doctest::Approx(expected[i]).epsilon(1e-12));
  }
  SUBCASE("batch gradient averages the episode terms and respects the mask") {
    ep.baselines = {0.0, 0.0};
    PerturbedEpisode other = ep;
    other.actions = {0, 1};
    const std::vector<PerturbedEpisode> eps{ep, other};
    const auto avg = reinforce_psn_gradient(policy, mean, 0.3, eps);
    const auto a = perturbed_episode_gradient(policy, mean, 0.3, ep);
    const auto b = perturbed_episode_gradient(policy, mean, 0.3, other);
    for (std::size_t i = 0; i < 6; ++i) CHECK(avg.values[i] == doctest::Approx((a[i] + b[i]) / 2));
    nn::ParamVector frozen = mean;
    std::fill(frozen.perturbable.begin(), frozen.perturbable.end(), 0);
    const auto unshifted = reinforce_psn_gradient(policy, frozen, 0.3, eps);
    const auto plain = reinforce_psn_gradient(policy, mean, 0.0, eps);
    for (std::size_t i = 0; i < 6; ++i) CHECK(unshifted.values[i] == doctest::Approx(plain.values[i]));
    CHECK_THROWS_AS(reinforce_psn_gradient(policy, mean, 0.3, std::span<const PerturbedEpisode>{}),
                    std::invalid_argument);
  }
}

TEST_CASE("gauss-hermite quadrature integrates normal moments") {
  const auto q = oracle::gauss_hermite(10);
  double m0 = 0, m2 = 0, m4 = 0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) {
    m0 += q.weights[i];
    m2 += q.weights[i] * std::pow(q.nodes[i], 2);
    m4 += q.weights[i] * std::pow(q.nodes[i], 4);
  }
  CHECK(m0 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m4 == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("perturbed-parameter gradient is unbiased for the smoothed return") {
  const oracle::TwoStateMdp mdp;
  const std::vector<double> phi{0.1, -0.2, 0.3, 0.4, -0.1, 0.2};
  const auto exact_rough = oracle::exact_smoothed_gradient(mdp, phi, 0.5, 8);
  const auto exact = oracle::exact_smoothed_gradient(mdp, phi, 0.5, 10);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(exact[i] - exact_rough[i]) < 1e-6);
  const auto mc = oracle::sampled_psn_gradient(mdp, phi, 0.5, 20000, 11);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(mc.mean[i] - exact[i]) <= 3.0 * mc.standard_error[i]);
  // the unsmoothed limit
  const auto plain = oracle::exact_return_gradient(mdp, phi);
  const auto mc0 = oracle::sampled_psn_gradient(mdp, phi, 0.0, 20000, 12);
  for (std::size_t i = 0; i < 6; ++i) CHECK(std::abs(mc0.mean[i] - plain[i]) <= 3.0 * mc0.standard_error[i]);
  // the exact score-function gradient agrees with finite differences of the return
  for (std::size_t i = 0; i < 6; ++i) {
    auto up = phi, down = phi;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    const double fd = (oracle::expected_return(mdp, up) - oracle::expected_return(mdp, down)) / 2e-6;
    CHECK(plain[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("reinforce agent") {
  auto c = AgentConfig{};
  c.kind = AgentKind::reinforce;
  c.learning_rate = 0.05;
  c.episodes_per_update = 5;
  c.hidden = {8};
  c.noise.kind = NoiseKind::param;
  c.noise.sigma = 0.05;
  c.noise.adapt_interval = 1;
  env::ChainEnv env(4);
  ReinforceAgent agent(c, env.spec(), 3);
  const auto start = nn::get_flat_params(agent.policy()).values;
  Rng rng(2);
  for (int e = 0; e < 400; ++e) run_training_episode(agent, env, rng);
  CHECK(nn::get_flat_params(agent.policy()).values != start);
  CHECK(std::isfinite(agent.last_distance()));
  const auto probs = agent.action_probs(env::chain_observation(2, 4));
  CHECK(probs[0] + probs[1] == doctest::Approx(1.0));
  CHECK(evaluate_policy(agent, env, 1, rng) == doctest::Approx(env::chain_optimal_return(4, 13)));
}

TEST_CASE("agent factory validation") {
  AgentConfig c;
  c.kind = AgentKind::dqn;
  c.noise.kind = NoiseKind::gaussian;
  CHECK_THROWS_AS(make_agent(c, toy_discrete(), 1), std::invalid_argument);
  c.kind = AgentKind::ddpg;
  CHECK_THROWS_AS(make_agent(c, toy_discrete(), 1), std::invalid_argument);
  c.kind = AgentKind::reinforce;
  c.noise.kind = NoiseKind::param;
  CHECK_THROWS_AS(make_agent(c, toy_box(), 1), std::invalid_argument);
  c.kind = AgentKind::dqn;
  c.noise.sigma = 0.0;
  CHECK_THROWS_AS(make_agent(c, toy_discrete(), 1), std::invalid_argument);
  c.noise.sigma = 0.1;
  c.gamma = 1.0;
  CHECK_THROWS_AS(make_agent(c, toy_discrete(), 1), std::invalid_argument);
  CHECK(parse_agent_kind("bootstrapped-dqn") == AgentKind::bootstrapped_dqn);
  CHECK(to_string(NoiseKind::epsilon_greedy) == "epsilon-greedy");
  CHECK_THROWS(parse_noise_kind("pink"));
}

TEST_CASE("agents survive a checkpoint round trip") {
  const std::vector<std::pair<std::string, std::string>> cases{
      {"chain-N8", "dqn-paramnoise"}, {"chain-N8", "bootstrapped-dqn"},
      {"chain-N8", "reinforce-paramnoise"}, {"dense-pendulum", "ddpg-paramnoise"}};
  for (const auto& [env_name, alias] : cases) {
    CAPTURE(alias);
    auto cfg = default_config(env_name, alias);
    cfg.agent.warmup_episodes = 0;
    cfg.agent.batch_size = 8;
    auto env = env::make_env(env_name);
    auto agent = make_agent(cfg.agent, env->spec(), 4);
    Rng rng(3);
    for (int e = 0; e < 3; ++e) run_training_episode(*agent, *env, rng);
    std::stringstream buf;
    write_checkpoint(agent->save(), buf);
    auto restored = make_agent(cfg.agent, env->spec(), 99);
    restored->load(read_checkpoint(buf));
    Rng obs_rng(8);
    for (int i = 0; i < 10; ++i) {
      const auto obs = env->reset(obs_rng);
      CHECK(agent->act(obs, ActMode::greedy) == restored->act(obs, ActMode::greedy));
    }
  }
}
