#pragma once

#include <span>
#include <string>

#include "psn/config.hpp"
#include "psn/experiment.hpp"
#include "psn/results.hpp"

namespace psn {

// Writes seed_<s>.csv (and seed_<s>.ckpt) per run, then aggregate.csv,
// summary.txt, plot.svg and the resolved config.ini into `dir`.
Aggregate write_experiment_outputs(const ExperimentConfig& config,
                                   std::span<const RunResult> results, const std::string& dir,
                                   const std::string& series);

}  // namespace psn
