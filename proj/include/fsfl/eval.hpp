#pragma once

#include <string>
#include <vector>

#include "fsfl/data.hpp"
#include "fsfl/models.hpp"

namespace fsfl {

struct RoundMetrics {
  int replicate_id = 0;
  std::string scheme;
  int round = 0;
  double accuracy = 0.0;
  int windows_evaluated = 0;
};

struct AggregateMetrics {
  std::string scheme;
  int round = 0;
  double mean = 0.0;
  double stderr_value = 0.0;
  int count = 0;
};

/// Accuracy over consecutive non-overlapping test windows of `window` samples
/// (trailing partial window discarded): per window the samples are encoded
/// (when an encoder is given), classified per step and counted against the
/// ground truth; the unweighted mean over windows is returned.
double windowed_accuracy(const Autoencoder* encoder, const Classifier& cls,
                         const TimeSeriesDataset& test, int window = 5000);

/// Mean and standard error (sample standard deviation / sqrt(n); 0 for n=1)
/// per (scheme, round) group, ordered by scheme then round.
std::vector<AggregateMetrics> aggregate_replicates(const std::vector<RoundMetrics>& rows);

}  // namespace fsfl
