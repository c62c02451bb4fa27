#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fsfl/errors.hpp"
#include "fsfl/tensor.hpp"

namespace fsfl {

/// Time-ordered rows of (feature vector, class label).
struct TimeSeriesDataset {
  int num_features = 0;
  int num_classes = 0;
  double sample_rate_hz = 33.0;
  int participants = 1;
  std::vector<float> features;  // rows * num_features, row-major
  std::vector<int> labels;

  size_t rows() const { return labels.size(); }
  const float* row(size_t r) const { return features.data() + r * num_features; }

  /// Feature rows [begin, begin+count) as a [count, num_features] tensor.
  TensorF feature_block(size_t begin, size_t count) const;
};

/// Strict CSV reader for the schema `f0,...,f{N-1},label`. Any malformed
/// cell fails with the 1-based line number.
TimeSeriesDataset load_csv(const std::string& path);

/// Synthetic HAR-like generator: the hidden activity follows a Markov chain
/// with expected dwell time `dwell`; features are a fixed per-class template
/// plus a class-specific sinusoid plus Gaussian noise. Class templates are
/// deterministic in (class, feature) only, so replicate seeds vary the noise
/// and the activity sequence but not the class geometry.
struct SynthConfig {
  int num_classes = 3;
  int num_features = 9;
  int train_len = 50000;
  int test_len = 10000;
  double dwell = 250.0;      // expected samples per activity segment
  double noise = 3.0;        // gaussian sigma on every feature
  double wave_amp = 0.2;     // amplitude of the per-class sinusoid
  double sample_rate_hz = 33.0;
  int participants = 4;
  uint64_t seed = 1;
};

std::pair<TimeSeriesDataset, TimeSeriesDataset> synth_generate(const SynthConfig& cfg);

/// Noise-free per-class feature template; nearest-template matching on
/// noise-free data recovers the label exactly (the generator keeps the
/// sinusoid amplitude below half the minimum template separation).
std::vector<float> synth_class_template(const SynthConfig& cfg, int cls);

/// Representation size d = round-half-up(ratio * num_features), floored at 1.
int repr_dim(int num_features, double ratio);

/// Server-side labelled subset: the training set is split into 100 contiguous
/// divisions (remainder rows on the last); max(1, round(100*ratio)) divisions
/// are sampled without replacement and concatenated in temporal order.
TimeSeriesDataset sample_labeled_subset(const TimeSeriesDataset& train, double label_ratio,
                                        uint64_t seed);

/// Client-local unlabelled data: a list of contiguous windows with all labels
/// stripped. n_k counts the samples across windows.
struct ClientPartition {
  int client_id = 0;
  std::vector<TensorF> windows;
  size_t n_k = 0;
};

/// Same windows, labels kept. Only the supervised scheme may see this type.
struct LabeledClientPartition {
  int client_id = 0;
  std::vector<TensorF> windows;
  std::vector<std::vector<int>> window_labels;
  size_t n_k = 0;
};

/// IID: per client, one random contiguous fragment of floor(n_k/100) samples
/// from each of 100 contiguous divisions. n_k = floor(rows / participants).
std::vector<ClientPartition> partition_iid(const TimeSeriesDataset& train, int num_clients,
                                           int participants, uint64_t seed);

/// Non-IID: per client, a single contiguous window of n_k samples at a
/// uniformly random start.
std::vector<ClientPartition> partition_noniid(const TimeSeriesDataset& train, int num_clients,
                                              int participants, uint64_t seed);

/// Label-keeping variants for the supervised scheme; window placement is
/// identical to the unlabelled versions under the same seed.
std::vector<LabeledClientPartition> partition_iid_labeled(const TimeSeriesDataset& train,
                                                          int num_clients, int participants,
                                                          uint64_t seed);
std::vector<LabeledClientPartition> partition_noniid_labeled(const TimeSeriesDataset& train,
                                                             int num_clients, int participants,
                                                             uint64_t seed);

}  // namespace fsfl
