#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsfl/data.hpp"
#include "fsfl/eval.hpp"
#include "fsfl/models.hpp"

namespace fsfl {

enum class Scheme { SEMI, SUPERVISED, CS, DA };
enum class PartitionKind { IID, NONIID };

const char* to_string(Scheme s);
const char* to_string(PartitionKind p);

struct FederationConfig {
  int num_clients = 100;         // K
  double client_fraction = 0.1;  // C
  int rounds = 50;               // T
  float lr_autoencoder = 0.01f;
  float lr_classifier = 0.001f;
  int epochs_autoencoder = 2;  // client-side epochs
  int epochs_classifier = 5;   // server-side epochs
  double label_ratio = 0.5;        // r^l
  double compression_ratio = 0.5;  // r^f
  Scheme scheme = Scheme::SEMI;
  PartitionKind partition = PartitionKind::IID;
  AeVariant ae_variant = AeVariant::LSTM;
  HeadKind head = HeadKind::SOFTMAX;  // SEMI only; other schemes use the LSTM classifier
  BaggingPolicy bagging;
  uint64_t seed = 1;
  int eval_every = 2;
  int eval_window = 5000;

  void validate() const;
};

struct GlobalState {
  Autoencoder autoencoder;  // empty params for schemes without one
  Classifier classifier;
  int round = 0;
};

struct ClientUpdate {
  int client_id = 0;
  ModelParams params;
  size_t n_k = 0;
};

/// Per-round diagnostics; failed clients are dropped from aggregation and
/// recorded here.
struct RoundLog {
  std::vector<std::string> messages;
};

/// Uniform sample of round(K*C) client ids without replacement, sorted
/// ascending. Keyed by (seed, round) only, so the set is stable across
/// schemes and execution orders.
std::vector<int> select_clients(int num_clients, double fraction, int round, uint64_t seed);

/// Weighted mean of the updates, weights n_k / sum(n_k), accumulated in
/// ascending client-id order in 64-bit.
ModelParams fedavg(const std::vector<ClientUpdate>& updates);

/// The 64-bit accumulation backing fedavg (one tensor per parameter, in the
/// model's order), before the cast back to 32-bit.
std::vector<TensorD> fedavg_accumulate(const std::vector<ClientUpdate>& updates);

/// Pseudo-labels one window with the given classifier, feeding it sequences
/// of randomized length drawn from the policy (LSTM state resets per
/// sequence).
std::vector<int> pseudo_label_window(const Classifier& cls, const TensorF& window,
                                     const BaggingPolicy& policy, Rng& rng);

GlobalState run_round_semi(GlobalState state, const FederationConfig& cfg,
                           const std::vector<ClientPartition>& partitions,
                           const TimeSeriesDataset& labeled, RoundLog* log = nullptr);

GlobalState run_round_supervised(GlobalState state, const FederationConfig& cfg,
                                 const std::vector<LabeledClientPartition>& partitions,
                                 RoundLog* log = nullptr);

GlobalState run_round_cs(GlobalState state, const FederationConfig& cfg,
                         const TimeSeriesDataset& labeled, RoundLog* log = nullptr);

GlobalState run_round_da(GlobalState state, const FederationConfig& cfg,
                         const std::vector<ClientPartition>& partitions,
                         const TimeSeriesDataset& labeled, RoundLog* log = nullptr);

/// Builds the initial global models for a scheme: the configured autoencoder
/// plus classifier head for SEMI; the raw-feature LSTM classifier for
/// CS/DA/SUPERVISED.
GlobalState init_global_state(const FederationConfig& cfg, int num_features, int num_classes);

/// One full replicate: T rounds of the configured scheme with evaluation on
/// the test set at round 0 and every eval_every-th round thereafter.
/// Deterministic in (cfg, datasets, replicate seed).
std::vector<RoundMetrics> run_experiment(const FederationConfig& cfg,
                                         const TimeSeriesDataset& train,
                                         const TimeSeriesDataset& test, int replicate_id,
                                         RoundLog* log = nullptr,
                                         GlobalState* final_state = nullptr);

}  // namespace fsfl
