#include "psn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "psn/error.hpp"

namespace psn {

std::string to_string(RunStatus status) {
  switch (status) {
    case RunStatus::solved: return "solved";
    case RunStatus::unsolved: return "unsolved";
    case RunStatus::failed: return "failed";
  }
  return "unsolved";
}

SolvedCheck solved_check(std::span<const double> history, double optimal, double tol,
                         int required) {
  if (!(tol >= 0.0)) throw std::invalid_argument("solved_check: tol must be >= 0");
  SolvedTracker tracker(optimal, tol, required);
  for (double r : history) tracker.push(r);
  return tracker.state();
}

SolvedTracker::SolvedTracker(double optimal, double tol, int required)
    : optimal_(optimal), tol_(tol), required_(required) {
  if (!(tol >= 0.0)) throw std::invalid_argument("SolvedTracker: tol must be >= 0");
  if (required < 1) throw std::invalid_argument("SolvedTracker: required streak must be >= 1");
}

SolvedCheck SolvedTracker::push(double eval_return) {
  if (eval_return >= optimal_ - tol_)
    ++streak_;
  else
    streak_ = 0;
  return state();
}

double evaluate_policy(Agent& agent, env::Environment& env, int n_episodes, Rng& rng) {
  if (n_episodes < 1) throw std::invalid_argument("evaluate_policy: n_episodes must be >= 1");
  double total = 0.0;
  for (int i = 0; i < n_episodes; ++i) {
    std::vector<double> obs = env.reset(rng);
    for (;;) {
      const env::StepResult r = env.step(agent.act(obs, ActMode::greedy));
      total += r.reward;
      if (r.done) break;
      obs = r.observation;
    }
  }
  return total / n_episodes;
}

EpisodeOutcome run_training_episode(Agent& agent, env::Environment& env, Rng& rng) {
  EpisodeOutcome out;
  agent.episode_boundary();
  std::vector<double> obs = env.reset(rng);
  for (;;) {
    const env::Action action = agent.act(obs, ActMode::explore);
    env::StepResult r = env.step(action);
    out.total_return += r.reward;
    ++out.steps;
    agent.observe(obs, action, r.reward, r.observation, r.done);
    if (r.done) break;
    obs = std::move(r.observation);
  }
  agent.end_episode();
  return out;
}

RunResult run_seed(const ExperimentConfig& config, std::uint64_t seed, const ProgressFn& progress) {
  validate(config);
  RunResult result;
  result.seed = seed;
  const Rng root(seed);
  Rng env_rng = root.split("env");
  Rng eval_rng = root.split("eval");
  auto train_env = env::make_env(config.env);
  auto eval_env = env::make_env(config.env);
  const std::optional<double> optimal = env::optimal_return(config.env);
  SolvedTracker tracker(optimal.value_or(0.0), config.solved_tol, config.solved_streak);
  constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

  std::unique_ptr<Agent> agent;
  try {
    agent = make_agent(config.agent, train_env->spec(), root.split("agent").seed());
    long long steps = 0;
    long long next_eval = config.eval_every_steps;
    double eval_return = kNaN;
    for (int episode = 1; episode <= config.max_episodes; ++episode) {
      if (config.max_steps > 0 && steps >= config.max_steps) break;
      const EpisodeOutcome ep = run_training_episode(*agent, *train_env, env_rng);
      steps += ep.steps;

      const bool last = episode == config.max_episodes ||
                        (config.max_steps > 0 && steps >= config.max_steps);
      bool evaluated = false;
      if (config.eval_every_steps == 0) {
        evaluated = true;
      } else if (steps >= next_eval || last) {
        evaluated = true;
        while (next_eval <= steps) next_eval += config.eval_every_steps;
      }
      if (evaluated) eval_return = evaluate_policy(*agent, *eval_env, config.eval_episodes, eval_rng);

      SolvedCheck check = tracker.state();
      if (optimal && evaluated) check = tracker.push(eval_return);

      EpisodeRow row{episode,        steps,          ep.total_return,    eval_return,
                     agent->sigma(), agent->last_distance(), check.streak};
      result.rows.push_back(row);
      if (progress) progress(seed, row);

      if (optimal && check.solved && !result.solved_at) {
        result.solved_at = episode;
        result.status = RunStatus::solved;
        if (config.stop_when_solved) break;
      }
    }
  } catch (const NumericError& e) {
    result.status = RunStatus::failed;
    result.error = e.what();
  }
  if (agent && config.save_checkpoints) {
    Checkpoint ckpt = agent->save();
    ckpt.set("seed", std::to_string(seed));
    ckpt.set("env", config.env);
    ckpt.set("config_hash", std::to_string(fnv1a(serialize_config(config))));
    ckpt.config_text = serialize_config(config);
    result.checkpoint = std::move(ckpt);
  }
  return result;
}

std::vector<std::uint64_t> effective_seeds(const ExperimentConfig& config) {
  std::uint64_t offset = 0;
  if (const char* env = std::getenv("SEED_OFFSET"); env && *env) {
    const std::string text(env);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != text.size()) throw std::invalid_argument("SEED_OFFSET must be a non-negative integer");
    offset = v;
  }
  std::vector<std::uint64_t> out;
  for (std::uint64_t s : config.seeds) out.push_back(s + offset);
  return out;
}

std::vector<RunResult> run_experiment(const ExperimentConfig& config, const ProgressFn& progress) {
  validate(config);
  const std::vector<std::uint64_t> seeds = effective_seeds(config);
  std::vector<RunResult> results(seeds.size());
  std::mutex progress_mutex;
  ProgressFn guarded;
  if (progress)
    guarded = [&](std::uint64_t seed, const EpisodeRow& row) {
      std::lock_guard lock(progress_mutex);
      progress(seed, row);
    };

  const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config.workers), seeds.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < seeds.size(); ++i) results[i] = run_seed(config, seeds[i], guarded);
    return results;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < seeds.size(); i = next++) {
        try {
          results[i] = run_seed(config, seeds[i], guarded);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  pool.clear();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

}  // namespace psn
