#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "psn/experiment.hpp"

namespace psn {

inline constexpr const char* kRunCsvHeader =
    "episode,steps,train_return,eval_return,sigma,distance,solved_streak";
inline constexpr const char* kAggregateCsvHeader = "series,episode,seeds,median,p25,p75";

void write_run_csv(const RunResult& result, std::ostream& out);
void write_run_csv(const RunResult& result, const std::string& path);
std::vector<EpisodeRow> read_run_csv(std::istream& in);
std::vector<EpisodeRow> read_run_csv(const std::string& path);

// q-th percentile (q in [0, 100]) with linear interpolation between order statistics.
double percentile(std::vector<double> values, double q);

struct AggregateRow {
  std::string series;
  int episode = 0;
  int seeds = 0;  // runs contributing a finite eval return at this episode
  double median = 0.0;
  double p25 = 0.0;
  double p75 = 0.0;
};

struct SolveSummary {
  int runs = 0;
  int solved = 0;
  int failed = 0;
  double median_episodes = 0.0;  // unsolved runs count as the abort cap
  double p25_episodes = 0.0;
  double p75_episodes = 0.0;
  double final_eval_median = 0.0;  // median over runs of the last finite eval return (NaN if none)
  double peak_eval_median = 0.0;   // largest per-episode median eval return (NaN if none)
};

struct Aggregate {
  std::vector<AggregateRow> rows;
  SolveSummary solve;
};

// Per-episode median and quartiles of eval_return across runs, plus the
// episodes-to-solve statistics with unsolved runs set to abort_cap.
Aggregate aggregate_runs(std::span<const RunResult> results, const std::string& series,
                         int abort_cap);

void write_aggregate_csv(std::span<const AggregateRow> rows, std::ostream& out);
void write_aggregate_csv(std::span<const AggregateRow> rows, const std::string& path);
std::vector<AggregateRow> read_aggregate_csv(std::istream& in);
std::vector<AggregateRow> read_aggregate_csv(const std::string& path);

// One line of run statistics; the episodes-to-solve fields only when
// `solve_stats` is set (tasks with a known optimum).
std::string format_summary(const std::string& series, const SolveSummary& summary,
                           bool solve_stats = true);

}  // namespace psn
