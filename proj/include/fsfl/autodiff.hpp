#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "fsfl/layers.hpp"
#include "fsfl/tensor.hpp"

namespace fsfl {

/// Tape slot ids for the twelve tensors of one LSTM cell.
struct LstmParamIds {
  int Wi, Ui, bi;
  int Wf, Uf, bf;
  int Wg, Ug, bg;
  int Wo, Uo, bo;
};

/// Define-by-run gradient tape. Each op computes its output eagerly and
/// records a closure that accumulates gradients into its inputs; backward()
/// replays the closures exactly once each, in reverse recording order.
///
/// A tape is built fresh per training batch. Slots own both the forward
/// value and its gradient; values are never mutated after creation, so
/// closures may reference them by id.
template <typename T>
class Tape {
 public:
  using Id = int;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Registers an input tensor. Leaves with requires_grad are the tensors
  /// reported by backward() when disconnected from the loss.
  Id leaf(Tensor<T> value, bool requires_grad = false);

  const Tensor<T>& val(Id id) const { return slots_[static_cast<size_t>(id)].value; }
  const Tensor<T>& grad(Id id) const { return slots_[static_cast<size_t>(id)].grad; }

  Id dense(Id x, Id W, Id b);
  Id relu_op(Id x);
  Id tanh_op(Id x);
  Id sigmoid_op(Id x);
  Id conv1d(Id x, Id kernels, Id bias);
  Id conv1d_transpose(Id h, Id kernels, Id bias);
  /// Train-mode batchnorm; updates the caller-owned running statistics in
  /// place as a forward side effect (they are not differentiated).
  Id batchnorm_train(Id x, Id gamma, Id beta, Tensor<T>& running_mean,
                     Tensor<T>& running_var);
  Id batchnorm_eval(Id x, Id gamma, Id beta, const Tensor<T>& running_mean,
                    const Tensor<T>& running_var);
  Id reshape(Id x, std::vector<int> new_shape);
  /// One LSTM cell step; returns (h', c').
  std::pair<Id, Id> lstm_step(Id x, Id h, Id c, const LstmParamIds& p);
  Id softmax_op(Id z);
  /// Mean cross-entropy of probability rows against integer labels.
  /// probs is [k] with one label or [B,k] with B labels.
  Id cross_entropy(Id probs, std::vector<int> labels);
  /// Mean squared error against a constant target.
  Id mse(Id x, Tensor<T> target);
  /// Arithmetic mean of scalar nodes.
  Id average(const std::vector<Id>& xs);

  struct BackwardResult {
    /// requires_grad leaves with no path to the loss (their gradient is zero).
    std::vector<Id> disconnected;
  };

  /// Reverse pass from a scalar loss node. Zeroes all gradients first, so
  /// calling it twice gives the same result.
  BackwardResult backward(Id loss);

  size_t num_slots() const { return slots_.size(); }
  size_t num_ops() const { return ops_.size(); }

 private:
  struct Slot {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool is_leaf = false;
  };
  struct OpRecord {
    std::vector<Id> inputs;
    std::vector<Id> outputs;
    std::function<void()> back;
  };

  Id push(Tensor<T> value);
  Tensor<T>& g(Id id) { return slots_[static_cast<size_t>(id)].grad; }
  const Tensor<T>& v(Id id) const { return slots_[static_cast<size_t>(id)].value; }
  void record(std::vector<Id> inputs, std::vector<Id> outputs, std::function<void()> back);

  std::vector<Slot> slots_;
  std::vector<OpRecord> ops_;
};

using TapeF = Tape<float>;
using TapeD = Tape<double>;

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace fsfl
