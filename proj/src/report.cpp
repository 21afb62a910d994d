#include "psn/report.hpp"

#include <filesystem>
#include <fstream>

#include "psn/env.hpp"
#include "psn/error.hpp"
#include "psn/plot.hpp"

namespace psn {

Aggregate write_experiment_outputs(const ExperimentConfig& config,
                                   std::span<const RunResult> results, const std::string& dir,
                                   const std::string& series) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());

  for (const auto& run : results) {
    const std::string stem = dir + "/seed_" + std::to_string(run.seed);
    write_run_csv(run, stem + ".csv");
    if (run.checkpoint) save_checkpoint(*run.checkpoint, stem + ".ckpt");
  }
  Aggregate agg = aggregate_runs(results, series, config.max_episodes);
  write_aggregate_csv(agg.rows, dir + "/aggregate.csv");
  write_svg(agg.rows, dir + "/plot.svg", PlotOptions{.title = config.env});

  const std::string summary_path = dir + "/summary.txt";
  std::ofstream summary(summary_path);
  if (!summary) throw IoError("cannot open '" + summary_path + "' for writing");
  const bool solve_stats = env::optimal_return(config.env).has_value();
  summary << format_summary(series, agg.solve, solve_stats) << '\n';
  for (const auto& run : results) {
    summary << "seed " << run.seed << ": " << to_string(run.status);
    if (run.solved_at) summary << " at episode " << *run.solved_at;
    if (!run.error.empty()) summary << " (" << run.error << ")";
    summary << '\n';
  }

  const std::string config_path = dir + "/config.ini";
  std::ofstream cfg(config_path);
  if (!cfg) throw IoError("cannot open '" + config_path + "' for writing");
  cfg << serialize_config(config);
  return agg;
}

}  // namespace psn
