#pragma once

#include <string>
#include <vector>

#include "fsfl/config.hpp"
#include "fsfl/eval.hpp"

namespace fsfl {

struct RunResult {
  std::vector<RoundMetrics> metrics;         // ordered by (replicate, round)
  std::vector<AggregateMetrics> aggregates;  // ordered by (scheme, round)
  std::vector<std::string> checkpoint_paths;
};

/// Executes `replicates` independent runs with seeds base+i over the worker
/// pool and writes metrics.csv, aggregate.csv, one checkpoint per replicate
/// and run.log into out_dir. Everything except run.log is byte-deterministic
/// in the config.
RunResult run_experiments(const ExperimentConfig& cfg);

/// RFC-4180 rows (CRLF, '.' decimals), header included.
std::string metrics_to_csv(const std::vector<RoundMetrics>& rows);
std::string aggregates_to_csv(const std::vector<AggregateMetrics>& rows);

}  // namespace fsfl
