#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fsfl/rng.hpp"
#include "fsfl/tensor.hpp"

namespace fsfl {

enum class AeVariant { FC, CNN, LSTM };
enum class HeadKind { SOFTMAX, LSTM };

const char* to_string(AeVariant v);
const char* to_string(HeadKind h);

struct AutoencoderSpec {
  AeVariant variant = AeVariant::LSTM;
  int input_dim = 0;  // feature count per sample
  int repr_dim = 0;   // representation size d, 1 <= d < input_dim
};

struct ClassifierSpec {
  HeadKind head = HeadKind::SOFTMAX;
  int input_dim = 0;
  int num_classes = 0;
  int hidden_dim = 0;  // LSTM head only; 0 means "same as input_dim"

  int effective_hidden() const { return hidden_dim > 0 ? hidden_dim : input_dim; }
};

/// Random batch sizes and sequence lengths used during training.
struct BaggingPolicy {
  int batch_min = 16;
  int batch_max = 64;
  int seq_min = 8;
  int seq_max = 64;

  void validate() const;
};

struct NamedTensor {
  std::string name;
  TensorF value;
};

/// Ordered set of named parameter tensors. The order is fixed by the builder
/// and shared by checkpoints, FedAvg and the optimizer.
struct ModelParams {
  std::vector<NamedTensor> tensors;

  void add(std::string name, TensorF value);
  TensorF& at(std::string_view name);
  const TensorF& at(std::string_view name) const;
  bool has(std::string_view name) const;
  size_t param_count() const;
  size_t byte_size() const;  // float payload when serialized

  /// Batchnorm running statistics ride along in the tensor list (so they are
  /// aggregated and checkpointed) but are not touched by the optimizer.
  static bool is_trainable(std::string_view name);
};

struct Autoencoder {
  AutoencoderSpec spec;
  ModelParams params;
};

struct Classifier {
  ClassifierSpec spec;
  ModelParams params;
};

Autoencoder build_autoencoder(const AutoencoderSpec& spec, uint64_t seed);
Classifier build_classifier(const ClassifierSpec& spec, uint64_t seed);

/// Encodes a window of samples, one representation row per input row.
/// FC/CNN encode rows independently; the LSTM encoder runs across the window
/// and emits every step's hidden state, the last row being the representation
/// of the final sample in the context of the whole window.
TensorF encode(const Autoencoder& ae, const TensorF& window);

/// Reconstruction with the encoder input's shape. The LSTM decoder consumes
/// the final representation repeated L times; during training its output is
/// compared against the time-reversed input window.
TensorF decode(const Autoencoder& ae, const TensorF& reps);

/// Per-step predicted class; ties broken toward the lowest class index.
/// The LSTM head carries its state across the whole window.
std::vector<int> classify(const Classifier& cls, const TensorF& reps);

struct TrainStatus {
  bool skipped_empty = false;
  int batches = 0;
  double last_loss = 0.0;
};

/// Unsupervised local training: `epochs` epochs of Adam on reconstruction MSE
/// over the given windows, batches and sequence lengths drawn from the policy
/// via the caller's stream. Returns the updated model; the input is not
/// mutated.
Autoencoder ae_train_locally(Autoencoder ae, const std::vector<TensorF>& windows, float lr,
                             int epochs, const BaggingPolicy& policy, Rng rng,
                             TrainStatus* status = nullptr);

/// Supervised training on labelled rows (features [N,in], labels [N]) with
/// Adam on cross-entropy, bagged like ae_train_locally.
Classifier train_classifier(Classifier cls, const TensorF& features,
                            const std::vector<int>& labels, float lr, int epochs,
                            const BaggingPolicy& policy, Rng rng,
                            TrainStatus* status = nullptr);

/// train_classifier over a list of contiguous labelled windows (sequences do
/// not cross window boundaries; one optimizer state spans all of them).
Classifier train_classifier_windows(Classifier cls, const std::vector<TensorF>& windows,
                                    const std::vector<std::vector<int>>& window_labels,
                                    float lr, int epochs, const BaggingPolicy& policy,
                                    Rng rng, TrainStatus* status = nullptr);

namespace detail {

/// One training sequence: seq_len contiguous rows of one window.
struct SeqRef {
  int window = 0;
  int start_row = 0;
};

/// One bagged batch: equal-length sequences pooled across windows.
struct SeqBatch {
  std::vector<SeqRef> seqs;
  int seq_len = 0;
  int num_seqs() const { return static_cast<int>(seqs.size()); }
  int rows() const { return num_seqs() * seq_len; }
};

/// Epoch plan over the windows: per batch, batch size and sequence length
/// are drawn from the policy. Sequences never cross window boundaries; a
/// window tail shorter than the drawn length is covered by a final sequence
/// anchored to the window end, and windows shorter than the drawn length
/// become single shorter sequences in their own batch.
std::vector<SeqBatch> plan_epoch(const std::vector<const TensorF*>& windows,
                                 const BaggingPolicy& policy, Rng& rng);

}  // namespace detail

}  // namespace fsfl
