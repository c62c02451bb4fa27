#pragma once

#include <vector>

#include "fsfl/errors.hpp"
#include "fsfl/tensor.hpp"

namespace fsfl {

// ---------------------------------------------------------------------------
// Elementwise maps
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> tanh_map(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid_map(const Tensor<T>& x);

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

/// y = W·x + b with W [out,in], b [out]. x may be [in] or batched [B,in];
/// the result keeps the input's rank.
template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b);

// ---------------------------------------------------------------------------
// 1-d convolution, stride 1, zero padding (k-1)/2 so length is preserved
// ---------------------------------------------------------------------------

/// kernels [C_out, C_in, k], bias [C_out]. x may be [L] (one channel),
/// [C_in, L], or [B, C_in, L]; output rank mirrors the input
/// ([L] -> [C_out, L]).
template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& kernels,
                         const Tensor<T>& bias);

/// Transposed convolution, the adjoint of conv1d_forward as a linear map.
/// kernels [C_in, C_out, k] (same tensor shape as the paired forward conv),
/// bias [C_out]. h may be [C_in, L] or [B, C_in, L].
template <typename T>
Tensor<T> conv1d_transpose_forward(const Tensor<T>& h, const Tensor<T>& kernels,
                                   const Tensor<T>& bias);

// ---------------------------------------------------------------------------
// Batch normalization over the channel dimension
// ---------------------------------------------------------------------------

enum class BatchNormMode { Train, Eval };

template <typename T>
struct BatchNormBatchStats {
  Tensor<T> mean;  // [C]
  Tensor<T> var;   // [C], biased (divided by N)
};

inline constexpr double kBatchNormEps = 1e-5;
inline constexpr double kBatchNormMomentum = 0.1;

/// x is [C, L] or [B, C, L]; statistics are per channel over all remaining
/// dims. Train mode normalizes with batch statistics and updates
/// running_mean/running_var in place (momentum 0.1, unbiased variance for the
/// running update); eval mode normalizes with the running statistics.
/// Train mode with a single value per channel is rejected.
template <typename T>
Tensor<T> batchnorm1d_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                              const Tensor<T>& beta, Tensor<T>& running_mean,
                              Tensor<T>& running_var, BatchNormMode mode,
                              BatchNormBatchStats<T>* batch_stats = nullptr);

// ---------------------------------------------------------------------------
// LSTM cell
// ---------------------------------------------------------------------------

/// Four-gate cell. W* are input-to-hidden [hid,in], U* hidden-to-hidden
/// [hid,hid], b* biases [hid]:
///   i = sigmoid(Wi x + Ui h + bi)      f = sigmoid(Wf x + Uf h + bf)
///   g = tanh  (Wg x + Ug h + bg)       o = sigmoid(Wo x + Uo h + bo)
///   c' = f*c + i*g                     h' = o * tanh(c')
template <typename T>
struct LstmCellParams {
  int input_dim = 0;
  int hidden_dim = 0;
  Tensor<T> Wi, Ui, bi;
  Tensor<T> Wf, Uf, bf;
  Tensor<T> Wg, Ug, bg;
  Tensor<T> Wo, Uo, bo;

  static LstmCellParams zeros(int input_dim, int hidden_dim);
  void validate() const;
};

template <typename T>
struct LstmState {
  Tensor<T> h;
  Tensor<T> c;

  static LstmState zeros(int hidden_dim) {
    return {Tensor<T>({hidden_dim}), Tensor<T>({hidden_dim})};
  }
  static LstmState zeros(int batch, int hidden_dim) {
    return {Tensor<T>({batch, hidden_dim}), Tensor<T>({batch, hidden_dim})};
  }
};

/// Saved gate activations, kept by the tape for the backward pass.
template <typename T>
struct LstmStepTrace {
  Tensor<T> i, f, g, o, tanh_c;
};

/// One cell step. x is [in] or [B,in]; prev.h/prev.c match ([hid] or [B,hid]).
template <typename T>
LstmState<T> lstm_step(const Tensor<T>& x, const LstmState<T>& prev,
                       const LstmCellParams<T>& p, LstmStepTrace<T>* trace = nullptr);

// ---------------------------------------------------------------------------
// Softmax and losses
// ---------------------------------------------------------------------------

/// Row-wise softmax with max subtraction; x is [k] or [B,k].
template <typename T>
Tensor<T> softmax(const Tensor<T>& z);

/// Mean of squared elementwise differences.
template <typename T>
T mse_loss(const Tensor<T>& x, const Tensor<T>& x_rec);

inline constexpr double kLogClamp = 1e-12;

/// -log p[y] with p clamped at 1e-12. p is a probability vector [k].
template <typename T>
T cross_entropy_loss(const Tensor<T>& p, int label);

extern template Tensor<float> relu(const Tensor<float>&);
extern template Tensor<double> relu(const Tensor<double>&);
extern template Tensor<float> tanh_map(const Tensor<float>&);
extern template Tensor<double> tanh_map(const Tensor<double>&);
extern template Tensor<float> sigmoid_map(const Tensor<float>&);
extern template Tensor<double> sigmoid_map(const Tensor<double>&);
extern template Tensor<float> dense_forward(const Tensor<float>&, const Tensor<float>&,
                                            const Tensor<float>&);
extern template Tensor<double> dense_forward(const Tensor<double>&, const Tensor<double>&,
                                             const Tensor<double>&);
extern template Tensor<float> conv1d_forward(const Tensor<float>&, const Tensor<float>&,
                                             const Tensor<float>&);
extern template Tensor<double> conv1d_forward(const Tensor<double>&, const Tensor<double>&,
                                              const Tensor<double>&);
extern template Tensor<float> conv1d_transpose_forward(const Tensor<float>&,
                                                       const Tensor<float>&,
                                                       const Tensor<float>&);
extern template Tensor<double> conv1d_transpose_forward(const Tensor<double>&,
                                                        const Tensor<double>&,
                                                        const Tensor<double>&);
extern template Tensor<float> batchnorm1d_forward(const Tensor<float>&, const Tensor<float>&,
                                                  const Tensor<float>&, Tensor<float>&,
                                                  Tensor<float>&, BatchNormMode,
                                                  BatchNormBatchStats<float>*);
extern template Tensor<double> batchnorm1d_forward(const Tensor<double>&,
                                                   const Tensor<double>&,
                                                   const Tensor<double>&, Tensor<double>&,
                                                   Tensor<double>&, BatchNormMode,
                                                   BatchNormBatchStats<double>*);
extern template struct LstmCellParams<float>;
extern template struct LstmCellParams<double>;
extern template LstmState<float> lstm_step(const Tensor<float>&, const LstmState<float>&,
                                           const LstmCellParams<float>&,
                                           LstmStepTrace<float>*);
extern template LstmState<double> lstm_step(const Tensor<double>&, const LstmState<double>&,
                                            const LstmCellParams<double>&,
                                            LstmStepTrace<double>*);
extern template Tensor<float> softmax(const Tensor<float>&);
extern template Tensor<double> softmax(const Tensor<double>&);
extern template float mse_loss(const Tensor<float>&, const Tensor<float>&);
extern template double mse_loss(const Tensor<double>&, const Tensor<double>&);
extern template float cross_entropy_loss(const Tensor<float>&, int);
extern template double cross_entropy_loss(const Tensor<double>&, int);

}  // namespace fsfl
