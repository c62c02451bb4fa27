#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsfl/data.hpp"
#include "fsfl/models.hpp"

namespace fsfl {

/// Local inference pipeline: optional encoder in front of a classifier
/// (the semi-supervised path), or a bare classifier on raw features.
struct PipelineModel {
  const Autoencoder* encoder = nullptr;
  const Classifier* classifier = nullptr;
};

struct LatencyReport {
  std::string scheme;
  std::vector<double> window_micros;       // per window, min over repetitions
  std::vector<double> window_micros_mean;  // per window, mean over repetitions
  double mean = 0.0;                       // over window_micros
  double median = 0.0;
  double p95 = 0.0;
  uint64_t mac_per_window = 0;
  size_t param_count = 0;
  size_t serialized_bytes = 0;
};

/// Analytic multiply-accumulate count of one forward pass over a window of
/// `window_len` samples. Per sample: dense out*in; LSTM step 4*h*(in+h);
/// conv 8*3*L and transposed conv alike; batchnorm 2 multiplies per element.
/// Softmax, ReLU and argmax are not counted.
uint64_t mac_count_encoder(const AutoencoderSpec& spec, int window_len);
uint64_t mac_count_classifier(const ClassifierSpec& spec, int window_len);
uint64_t mac_count(const PipelineModel& model, int window_len);

/// Splits the test set into windows of `samples_per_window` rows (one second
/// of data at the dataset rate) and wall-clock times the full pipeline per
/// window over `repetitions` passes after one warm-up pass.
LatencyReport time_pipeline(const PipelineModel& model, const TimeSeriesDataset& test,
                            int samples_per_window, int repetitions, std::string scheme_name);

struct MannWhitneyResult {
  double u_statistic = 0.0;  // U of the first sample
  double p_value = 1.0;      // two-sided, normal approximation with tie correction
  int direction = 0;         // -1: first sample smaller, +1: larger, 0: no difference
};

MannWhitneyResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b);

/// Two-sided Mann-Whitney U on the per-window latencies; requires at least
/// 30 windows on each side.
MannWhitneyResult compare_latency(const LatencyReport& a, const LatencyReport& b);

}  // namespace fsfl
