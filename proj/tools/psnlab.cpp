// psnlab: train, evaluate, sweep and plot parameter-noise experiments.

#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "psn/checkpoint.hpp"
#include "psn/config.hpp"
#include "psn/env.hpp"
#include "psn/error.hpp"
#include "psn/experiment.hpp"
#include "psn/plot.hpp"
#include "psn/report.hpp"
#include "psn/results.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRunFailure = 2;
constexpr int kExitIo = 3;

psn::ProgressFn progress_printer(bool quiet) {
  if (quiet) return {};
  return [](std::uint64_t seed, const psn::EpisodeRow& row) {
    if (row.episode % 50 != 0) return;
    std::fprintf(stderr, "seed %llu episode %d steps %lld eval %.4g sigma %.4g streak %d\n",
                 static_cast<unsigned long long>(seed), row.episode, row.steps, row.eval_return,
                 row.sigma, row.solved_streak);
  };
}

bool any_failed(const std::vector<psn::RunResult>& results) {
  for (const auto& r : results)
    if (r.status == psn::RunStatus::failed) return true;
  return false;
}

int cmd_run(const std::string& path, const std::vector<std::string>& overrides,
            const std::string& out_dir, bool quiet) {
  psn::ExperimentConfig config = psn::load_config(path, overrides);
  if (!out_dir.empty()) config.output_dir = out_dir;
  const auto results = psn::run_experiment(config, progress_printer(quiet));
  const auto agg = psn::write_experiment_outputs(config, results, config.output_dir, config.agent_name);
  const bool solve_stats = psn::env::optimal_return(config.env).has_value();
  std::cout << psn::format_summary(config.agent_name, agg.solve, solve_stats) << '\n';
  for (const auto& r : results)
    if (r.status == psn::RunStatus::failed)
      std::cerr << "seed " << r.seed << " failed: " << r.error << '\n';
  std::cout << "outputs written to " << config.output_dir << '\n';
  return any_failed(results) ? kExitRunFailure : kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& env_name, int episodes,
             std::uint64_t seed) {
  const psn::Checkpoint ckpt = psn::load_checkpoint(ckpt_path);
  const psn::ExperimentConfig config = psn::parse_config(ckpt.config_text);
  auto env = psn::env::make_env(env_name);
  auto agent = psn::make_agent(config.agent, env->spec(), 0);
  agent->load(ckpt);
  psn::Rng rng = psn::Rng(seed).split("eval");
  const double mean = psn::evaluate_policy(*agent, *env, episodes, rng);
  std::cout << "mean return over " << episodes << " episodes: " << psn::format_double(mean) << '\n';
  return kExitOk;
}

std::vector<std::vector<std::string>> cartesian(const std::vector<std::string>& varies) {
  std::vector<std::vector<std::string>> combos{{}};
  for (const auto& spec : varies) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("--vary needs key=v1,v2,...: '" + spec + "'");
    const std::string key = spec.substr(0, eq);
    std::vector<std::string> values;
    std::stringstream ss(spec.substr(eq + 1));
    std::string v;
    while (std::getline(ss, v, ',')) values.push_back(v);
    if (values.empty()) throw std::invalid_argument("--vary lists no values: '" + spec + "'");
    std::vector<std::vector<std::string>> next;
    for (const auto& c : combos)
      for (const auto& value : values) {
        auto extended = c;
        extended.push_back(key + "=" + value);
        next.push_back(std::move(extended));
      }
    combos = std::move(next);
  }
  return combos;
}

int cmd_sweep(const std::string& path, const std::vector<std::string>& varies,
              const std::string& out_dir, bool quiet) {
  const psn::ExperimentConfig base = psn::load_config(path);
  const std::string root = out_dir.empty() ? base.output_dir : out_dir;
  std::vector<psn::AggregateRow> all_rows;
  bool failed = false;
  for (const auto& overrides : cartesian(varies)) {
    std::string label;
    for (const auto& o : overrides) label += (label.empty() ? "" : " ") + o;
    std::string dir_name;
    for (char ch : label) dir_name += (ch == ' ' || ch == '/' || ch == ',') ? '_' : ch;
    psn::ExperimentConfig config = psn::load_config(path, overrides);
    config.output_dir = root + "/" + dir_name;
    const auto results = psn::run_experiment(config, progress_printer(quiet));
    const auto agg = psn::write_experiment_outputs(config, results, config.output_dir, label);
    all_rows.insert(all_rows.end(), agg.rows.begin(), agg.rows.end());
    const bool solve_stats = psn::env::optimal_return(config.env).has_value();
    std::cout << psn::format_summary(label, agg.solve, solve_stats) << '\n';
    failed = failed || any_failed(results);
  }
  psn::write_aggregate_csv(all_rows, root + "/aggregate.csv");
  psn::write_svg(all_rows, root + "/plot.svg", psn::PlotOptions{.title = base.env});
  std::cout << "outputs written to " << root << '\n';
  return failed ? kExitRunFailure : kExitOk;
}

int cmd_plot(const std::string& csv, const std::string& out, const std::string& title) {
  const auto rows = psn::read_aggregate_csv(csv);
  psn::write_svg(rows, out, psn::PlotOptions{.title = title});
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter-space noise experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Train every seed of a config and write results");
  run->add_option("config", config_path, "Experiment config file")->required();
  run->add_option("--set", overrides, "Override a config value, section.key=value");
  run->add_option("-o,--out", out_dir, "Output directory (default: experiment.output_dir)");
  run->add_flag("-q,--quiet", quiet, "No progress output");

  std::string ckpt_path, env_name;
  int episodes = 10;
  std::uint64_t eval_seed = 0;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint without noise");
  eval->add_option("checkpoint", ckpt_path, "Checkpoint file")->required();
  eval->add_option("env", env_name, "Environment name")->required();
  eval->add_option("--episodes", episodes, "Evaluation episodes")->check(CLI::PositiveNumber);
  eval->add_option("--seed", eval_seed, "Seed for environment resets");

  std::vector<std::string> varies;
  auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of varied config values");
  sweep->add_option("config", config_path, "Experiment config file")->required();
  sweep->add_option("--vary", varies, "section.key=v1,v2,... (repeatable)")->required();
  sweep->add_option("-o,--out", out_dir, "Output directory");
  sweep->add_flag("-q,--quiet", quiet, "No progress output");

  std::string csv_path, svg_path, title = "evaluation return";
  auto* plot = app.add_subcommand("plot", "Render an aggregate CSV as SVG");
  plot->add_option("aggregate", csv_path, "aggregate.csv")->required();
  plot->add_option("-o,--output", svg_path, "Output SVG")->required();
  plot->add_option("--title", title, "Chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run) return cmd_run(config_path, overrides, out_dir, quiet);
    if (*eval) return cmd_eval(ckpt_path, env_name, episodes, eval_seed);
    if (*sweep) return cmd_sweep(config_path, varies, out_dir, quiet);
    if (*plot) return cmd_plot(csv_path, svg_path, title);
  } catch (const psn::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const psn::NumericError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRunFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}
