#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "psn/agent.hpp"
#include "psn/checkpoint.hpp"
#include "psn/config.hpp"
#include "psn/env.hpp"
#include "psn/rng.hpp"

namespace psn {

struct EpisodeRow {
  int episode = 0;              // 1-based
  long long steps = 0;          // cumulative environment steps
  double train_return = 0.0;
  double eval_return = 0.0;     // latest evaluation, NaN before the first one
  double sigma = 0.0;           // NaN without parameter noise
  double distance = 0.0;        // NaN before the first measurement
  int solved_streak = 0;
};

enum class RunStatus { solved, unsolved, failed };

std::string to_string(RunStatus status);

struct RunResult {
  std::uint64_t seed = 0;
  std::vector<EpisodeRow> rows;
  std::optional<int> solved_at;  // episode at which the streak reached its target
  RunStatus status = RunStatus::unsolved;
  std::string error;             // set when status is failed
  std::optional<Checkpoint> checkpoint;
};

struct SolvedCheck {
  bool solved = false;
  int streak = 0;
};

// Streak = number of trailing returns >= optimal - tol.
SolvedCheck solved_check(std::span<const double> history, double optimal, double tol,
                         int required = 100);

// Incremental form of solved_check.
class SolvedTracker {
public:
  SolvedTracker(double optimal, double tol, int required = 100);
  SolvedCheck push(double eval_return);
  SolvedCheck state() const { return {streak_ >= required_, streak_}; }

private:
  double optimal_;
  double tol_;
  int required_;
  int streak_ = 0;
};

// Mean undiscounted return of noise-free (greedy / majority-vote) rollouts.
double evaluate_policy(Agent& agent, env::Environment& env, int n_episodes, Rng& rng);

struct EpisodeOutcome {
  double total_return = 0.0;
  int steps = 0;
};

// One training episode: boundary call, exploratory actions, observe, end.
EpisodeOutcome run_training_episode(Agent& agent, env::Environment& env, Rng& rng);

using ProgressFn = std::function<void(std::uint64_t seed, const EpisodeRow& row)>;

RunResult run_seed(const ExperimentConfig& config, std::uint64_t seed,
                   const ProgressFn& progress = {});

// All seeds of the config (shifted by SEED_OFFSET when set), on up to
// config.workers threads. Results follow the seed order.
std::vector<RunResult> run_experiment(const ExperimentConfig& config,
                                      const ProgressFn& progress = {});

std::vector<std::uint64_t> effective_seeds(const ExperimentConfig& config);

}  // namespace psn
