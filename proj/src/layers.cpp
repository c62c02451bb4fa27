#include "fsfl/layers.hpp"

#include <algorithm>
#include <cmath>

namespace fsfl {

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor<T> tanh_map(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.data) v = std::tanh(v);
  return y;
}

template <typename T>
Tensor<T> sigmoid_map(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (auto& v : y.data) v = T(1) / (T(1) + std::exp(-v));
  return y;
}

template <typename T>
Tensor<T> dense_forward(const Tensor<T>& x, const Tensor<T>& W, const Tensor<T>& b) {
  if (W.rank() != 2) throw ShapeError("dense: weight must be rank 2, got " + W.shape_str());
  const int out = W.dim(0), in = W.dim(1);
  if (b.rank() != 1 || b.dim(0) != out) {
    throw ShapeError("dense: bias " + b.shape_str() + " vs weight " + W.shape_str());
  }
  const bool batched = x.rank() == 2;
  if ((batched ? x.dim(1) : (x.rank() == 1 ? x.dim(0) : -1)) != in) {
    throw ShapeError("dense: input " + x.shape_str() + " vs weight " + W.shape_str());
  }
  const int rows = batched ? x.dim(0) : 1;
  Tensor<T> y(batched ? std::vector<int>{rows, out} : std::vector<int>{out});
  for (int r = 0; r < rows; ++r) {
    const T* xr = x.data.data() + static_cast<size_t>(r) * in;
    T* yr = y.data.data() + static_cast<size_t>(r) * out;
    for (int o = 0; o < out; ++o) {
      T acc = b.data[o];
      const T* wrow = W.data.data() + static_cast<size_t>(o) * in;
      for (int i = 0; i < in; ++i) acc += wrow[i] * xr[i];
      yr[o] = acc;
    }
  }
  return y;
}

namespace {

// Normalizes [L], [C,L], [B,C,L] to (B, C, L) and remembers the original rank.
struct ConvShape {
  int batch, channels, length, orig_rank;
};

template <typename T>
ConvShape conv_shape(const Tensor<T>& x, int expect_channels, const char* what) {
  ConvShape s{1, 1, 0, x.rank()};
  if (x.rank() == 1) {
    s.length = x.dim(0);
  } else if (x.rank() == 2) {
    s.channels = x.dim(0);
    s.length = x.dim(1);
  } else if (x.rank() == 3) {
    s.batch = x.dim(0);
    s.channels = x.dim(1);
    s.length = x.dim(2);
  } else {
    throw ShapeError(std::string(what) + ": input rank must be 1..3, got " + x.shape_str());
  }
  if (s.channels != expect_channels) {
    throw ShapeError(std::string(what) + ": input " + x.shape_str() + " has " +
                     std::to_string(s.channels) + " channels, kernels expect " +
                     std::to_string(expect_channels));
  }
  return s;
}

template <typename T>
void check_kernels(const Tensor<T>& kernels, const char* what) {
  if (kernels.rank() != 3) {
    throw ConfigError(std::string(what) + ": kernel tensor must be rank 3, got " +
                      kernels.shape_str());
  }
  if (kernels.dim(2) % 2 == 0) {
    throw ConfigError(std::string(what) + ": kernel size must be odd to preserve length, got " +
                      kernels.shape_str());
  }
}

std::vector<int> conv_out_shape(const ConvShape& s, int out_channels) {
  if (s.orig_rank == 3) return {s.batch, out_channels, s.length};
  return {out_channels, s.length};
}

}  // namespace

template <typename T>
Tensor<T> conv1d_forward(const Tensor<T>& x, const Tensor<T>& kernels, const Tensor<T>& bias) {
  check_kernels(kernels, "conv1d");
  const int c_out = kernels.dim(0), c_in = kernels.dim(1), k = kernels.dim(2);
  const int pad = (k - 1) / 2;
  const ConvShape s = conv_shape(x, c_in, "conv1d");
  if (bias.rank() != 1 || bias.dim(0) != c_out) {
    throw ShapeError("conv1d: bias " + bias.shape_str() + " vs kernels " + kernels.shape_str());
  }
  Tensor<T> y(conv_out_shape(s, c_out));
  const int L = s.length;
  for (int b = 0; b < s.batch; ++b) {
    const T* xb = x.data.data() + static_cast<size_t>(b) * c_in * L;
    T* yb = y.data.data() + static_cast<size_t>(b) * c_out * L;
    for (int co = 0; co < c_out; ++co) {
      for (int q = 0; q < L; ++q) {
        T acc = bias.data[co];
        for (int ci = 0; ci < c_in; ++ci) {
          const T* krow = kernels.data.data() + (static_cast<size_t>(co) * c_in + ci) * k;
          const T* xrow = xb + static_cast<size_t>(ci) * L;
          for (int t = 0; t < k; ++t) {
            const int p = q + t - pad;
            if (p >= 0 && p < L) acc += krow[t] * xrow[p];
          }
        }
        yb[static_cast<size_t>(co) * L + q] = acc;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> conv1d_transpose_forward(const Tensor<T>& h, const Tensor<T>& kernels,
                                   const Tensor<T>& bias) {
  check_kernels(kernels, "conv1d_transpose");
  const int c_in = kernels.dim(0), c_out = kernels.dim(1), k = kernels.dim(2);
  const int pad = (k - 1) / 2;
  const ConvShape s = conv_shape(h, c_in, "conv1d_transpose");
  if (bias.rank() != 1 || bias.dim(0) != c_out) {
    throw ShapeError("conv1d_transpose: bias " + bias.shape_str() + " vs kernels " +
                     kernels.shape_str());
  }
  Tensor<T> y(conv_out_shape(s, c_out));
  const int L = s.length;
  // Adjoint of conv1d: y[co,r] = sum_ci sum_t K[ci,co,t] * h[ci, r - t + pad].
  for (int b = 0; b < s.batch; ++b) {
    const T* hb = h.data.data() + static_cast<size_t>(b) * c_in * L;
    T* yb = y.data.data() + static_cast<size_t>(b) * c_out * L;
    for (int co = 0; co < c_out; ++co) {
      for (int r = 0; r < L; ++r) {
        T acc = bias.data[co];
        for (int ci = 0; ci < c_in; ++ci) {
          const T* krow = kernels.data.data() + (static_cast<size_t>(ci) * c_out + co) * k;
          const T* hrow = hb + static_cast<size_t>(ci) * L;
          for (int t = 0; t < k; ++t) {
            const int p = r - t + pad;
            if (p >= 0 && p < L) acc += krow[t] * hrow[p];
          }
        }
        yb[static_cast<size_t>(co) * L + r] = acc;
      }
    }
  }
  return y;
}

template <typename T>
Tensor<T> batchnorm1d_forward(const Tensor<T>& x, const Tensor<T>& gamma,
                              const Tensor<T>& beta, Tensor<T>& running_mean,
                              Tensor<T>& running_var, BatchNormMode mode,
                              BatchNormBatchStats<T>* batch_stats) {
  if (x.rank() != 2 && x.rank() != 3) {
    throw ShapeError("batchnorm: input must be [C,L] or [B,C,L], got " + x.shape_str());
  }
  const int B = x.rank() == 3 ? x.dim(0) : 1;
  const int C = x.rank() == 3 ? x.dim(1) : x.dim(0);
  const int L = x.rank() == 3 ? x.dim(2) : x.dim(1);
  const Tensor<T>* chan_params[] = {&gamma, &beta, &running_mean, &running_var};
  for (const Tensor<T>* t : chan_params) {
    if (t->rank() != 1 || t->dim(0) != C) {
      throw ShapeError("batchnorm: parameter " + t->shape_str() + " vs input " + x.shape_str());
    }
  }
  const size_t n = static_cast<size_t>(B) * L;  // values per channel
  Tensor<T> mean({C}), var({C});
  if (mode == BatchNormMode::Train) {
    if (n < 2) {
      throw DataError("batchnorm: train mode needs at least 2 values per channel, got 1");
    }
    for (int c = 0; c < C; ++c) {
      double sum = 0.0;
      for (int b = 0; b < B; ++b)
        for (int l = 0; l < L; ++l)
          sum += x.data[(static_cast<size_t>(b) * C + c) * L + l];
      const double m = sum / static_cast<double>(n);
      double sq = 0.0;
      for (int b = 0; b < B; ++b)
        for (int l = 0; l < L; ++l) {
          const double d = x.data[(static_cast<size_t>(b) * C + c) * L + l] - m;
          sq += d * d;
        }
      mean.data[c] = static_cast<T>(m);
      var.data[c] = static_cast<T>(sq / static_cast<double>(n));
      const double unbiased = sq / static_cast<double>(n - 1);
      running_mean.data[c] = static_cast<T>((1.0 - kBatchNormMomentum) * running_mean.data[c] +
                                            kBatchNormMomentum * m);
      running_var.data[c] = static_cast<T>((1.0 - kBatchNormMomentum) * running_var.data[c] +
                                           kBatchNormMomentum * unbiased);
    }
  } else {
    mean = running_mean;
    var = running_var;
  }
  if (batch_stats) {
    batch_stats->mean = mean;
    batch_stats->var = var;
  }
  Tensor<T> y(x.shape);
  for (int c = 0; c < C; ++c) {
    const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(var.data[c]) + kBatchNormEps));
    for (int b = 0; b < B; ++b) {
      const size_t base = (static_cast<size_t>(b) * C + c) * L;
      for (int l = 0; l < L; ++l) {
        y.data[base + l] = gamma.data[c] * (x.data[base + l] - mean.data[c]) * inv + beta.data[c];
      }
    }
  }
  return y;
}

template <typename T>
LstmCellParams<T> LstmCellParams<T>::zeros(int input_dim, int hidden_dim) {
  LstmCellParams p;
  p.input_dim = input_dim;
  p.hidden_dim = hidden_dim;
  const std::vector<int> wi{hidden_dim, input_dim}, uh{hidden_dim, hidden_dim}, bv{hidden_dim};
  p.Wi = Tensor<T>(wi); p.Ui = Tensor<T>(uh); p.bi = Tensor<T>(bv);
  p.Wf = Tensor<T>(wi); p.Uf = Tensor<T>(uh); p.bf = Tensor<T>(bv);
  p.Wg = Tensor<T>(wi); p.Ug = Tensor<T>(uh); p.bg = Tensor<T>(bv);
  p.Wo = Tensor<T>(wi); p.Uo = Tensor<T>(uh); p.bo = Tensor<T>(bv);
  return p;
}

template <typename T>
void LstmCellParams<T>::validate() const {
  const std::vector<int> wi{hidden_dim, input_dim}, uh{hidden_dim, hidden_dim}, bv{hidden_dim};
  for (const auto* w : {&Wi, &Wf, &Wg, &Wo}) {
    if (w->shape != wi)
      throw ShapeError("lstm: input weight " + w->shape_str() + " vs expected " +
                       Tensor<T>::shape_str(wi));
  }
  for (const auto* u : {&Ui, &Uf, &Ug, &Uo}) {
    if (u->shape != uh)
      throw ShapeError("lstm: hidden weight " + u->shape_str() + " vs expected " +
                       Tensor<T>::shape_str(uh));
  }
  for (const auto* b : {&bi, &bf, &bg, &bo}) {
    if (b->shape != bv)
      throw ShapeError("lstm: bias " + b->shape_str() + " vs expected " +
                       Tensor<T>::shape_str(bv));
  }
}

template <typename T>
LstmState<T> lstm_step(const Tensor<T>& x, const LstmState<T>& prev,
                       const LstmCellParams<T>& p, LstmStepTrace<T>* trace) {
  const bool batched = x.rank() == 2;
  const int in = batched ? x.dim(1) : (x.rank() == 1 ? x.dim(0) : -1);
  if (in != p.input_dim) {
    throw ShapeError("lstm_step: input " + x.shape_str() + " vs cell input_dim " +
                     std::to_string(p.input_dim));
  }
  require_same_shape(prev.h, prev.c, "lstm_step state");
  const int hdim = batched ? prev.h.dim(1) : prev.h.dim(0);
  const int hbatch = batched ? prev.h.dim(0) : 1;
  if (hdim != p.hidden_dim || (batched && hbatch != x.dim(0)) ||
      prev.h.rank() != x.rank()) {
    throw ShapeError("lstm_step: state " + prev.h.shape_str() + " vs input " + x.shape_str() +
                     " and hidden_dim " + std::to_string(p.hidden_dim));
  }

  const int rows = batched ? x.dim(0) : 1;
  const int hid = p.hidden_dim;
  const int in_dim = p.input_dim;

  // Fused gate computation; one allocation per gate keeps short-step
  // inference from being allocator-bound.
  auto gate = [&](const Tensor<T>& W, const Tensor<T>& U, const Tensor<T>& b, bool is_tanh) {
    Tensor<T> a(prev.h.shape);
    for (int r = 0; r < rows; ++r) {
      const T* xr = x.data.data() + static_cast<size_t>(r) * in_dim;
      const T* hr = prev.h.data.data() + static_cast<size_t>(r) * hid;
      T* ar = a.data.data() + static_cast<size_t>(r) * hid;
      for (int u = 0; u < hid; ++u) {
        T acc = b.data[u];
        const T* wrow = W.data.data() + static_cast<size_t>(u) * in_dim;
        for (int i = 0; i < in_dim; ++i) acc += wrow[i] * xr[i];
        const T* urow = U.data.data() + static_cast<size_t>(u) * hid;
        for (int j = 0; j < hid; ++j) acc += urow[j] * hr[j];
        ar[u] = is_tanh ? std::tanh(acc) : T(1) / (T(1) + std::exp(-acc));
      }
    }
    return a;
  };
  Tensor<T> i = gate(p.Wi, p.Ui, p.bi, false);
  Tensor<T> f = gate(p.Wf, p.Uf, p.bf, false);
  Tensor<T> g = gate(p.Wg, p.Ug, p.bg, true);
  Tensor<T> o = gate(p.Wo, p.Uo, p.bo, false);

  LstmState<T> next;
  next.c = Tensor<T>(prev.c.shape);
  for (size_t idx = 0; idx < next.c.data.size(); ++idx) {
    next.c.data[idx] = f.data[idx] * prev.c.data[idx] + i.data[idx] * g.data[idx];
  }
  Tensor<T> tc = tanh_map(next.c);
  next.h = Tensor<T>(prev.h.shape);
  for (size_t idx = 0; idx < next.h.data.size(); ++idx) {
    next.h.data[idx] = o.data[idx] * tc.data[idx];
  }
  if (trace) {
    trace->i = std::move(i);
    trace->f = std::move(f);
    trace->g = std::move(g);
    trace->o = std::move(o);
    trace->tanh_c = std::move(tc);
  }
  return next;
}

template <typename T>
Tensor<T> softmax(const Tensor<T>& z) {
  if (z.rank() != 1 && z.rank() != 2) {
    throw ShapeError("softmax: input must be [k] or [B,k], got " + z.shape_str());
  }
  const int rows = z.rank() == 2 ? z.dim(0) : 1;
  const int k = z.rank() == 2 ? z.dim(1) : z.dim(0);
  Tensor<T> p(z.shape);
  for (int r = 0; r < rows; ++r) {
    const T* zr = z.data.data() + static_cast<size_t>(r) * k;
    T* pr = p.data.data() + static_cast<size_t>(r) * k;
    T zmax = zr[0];
    for (int j = 1; j < k; ++j) zmax = std::max(zmax, zr[j]);
    T sum = T(0);
    for (int j = 0; j < k; ++j) {
      pr[j] = std::exp(zr[j] - zmax);
      sum += pr[j];
    }
    for (int j = 0; j < k; ++j) pr[j] /= sum;
  }
  return p;
}

template <typename T>
T mse_loss(const Tensor<T>& x, const Tensor<T>& x_rec) {
  require_same_shape(x, x_rec, "mse_loss");
  double acc = 0.0;
  for (size_t i = 0; i < x.data.size(); ++i) {
    const double d = static_cast<double>(x.data[i]) - static_cast<double>(x_rec.data[i]);
    acc += d * d;
  }
  return static_cast<T>(acc / static_cast<double>(x.data.size()));
}

template <typename T>
T cross_entropy_loss(const Tensor<T>& p, int label) {
  if (p.rank() != 1) throw ShapeError("cross_entropy: probabilities must be rank 1, got " + p.shape_str());
  if (label < 0 || label >= p.dim(0)) {
    throw DataError("cross_entropy: label " + std::to_string(label) + " outside [0, " +
                    std::to_string(p.dim(0)) + ")");
  }
  const double py = std::max(static_cast<double>(p.data[label]), kLogClamp);
  return static_cast<T>(-std::log(py));
}

template Tensor<float> relu(const Tensor<float>&);
template Tensor<double> relu(const Tensor<double>&);
template Tensor<float> tanh_map(const Tensor<float>&);
template Tensor<double> tanh_map(const Tensor<double>&);
template Tensor<float> sigmoid_map(const Tensor<float>&);
template Tensor<double> sigmoid_map(const Tensor<double>&);
template Tensor<float> dense_forward(const Tensor<float>&, const Tensor<float>&,
                                     const Tensor<float>&);
template Tensor<double> dense_forward(const Tensor<double>&, const Tensor<double>&,
                                      const Tensor<double>&);
template Tensor<float> conv1d_forward(const Tensor<float>&, const Tensor<float>&,
                                      const Tensor<float>&);
template Tensor<double> conv1d_forward(const Tensor<double>&, const Tensor<double>&,
                                       const Tensor<double>&);
template Tensor<float> conv1d_transpose_forward(const Tensor<float>&, const Tensor<float>&,
                                                const Tensor<float>&);
template Tensor<double> conv1d_transpose_forward(const Tensor<double>&, const Tensor<double>&,
                                                 const Tensor<double>&);
template Tensor<float> batchnorm1d_forward(const Tensor<float>&, const Tensor<float>&,
                                           const Tensor<float>&, Tensor<float>&,
                                           Tensor<float>&, BatchNormMode,
                                           BatchNormBatchStats<float>*);
template Tensor<double> batchnorm1d_forward(const Tensor<double>&, const Tensor<double>&,
                                            const Tensor<double>&, Tensor<double>&,
                                            Tensor<double>&, BatchNormMode,
                                            BatchNormBatchStats<double>*);
template struct LstmCellParams<float>;
template struct LstmCellParams<double>;
template LstmState<float> lstm_step(const Tensor<float>&, const LstmState<float>&,
                                    const LstmCellParams<float>&, LstmStepTrace<float>*);
template LstmState<double> lstm_step(const Tensor<double>&, const LstmState<double>&,
                                     const LstmCellParams<double>&, LstmStepTrace<double>*);
template Tensor<float> softmax(const Tensor<float>&);
template Tensor<double> softmax(const Tensor<double>&);
template float mse_loss(const Tensor<float>&, const Tensor<float>&);
template double mse_loss(const Tensor<double>&, const Tensor<double>&);
template float cross_entropy_loss(const Tensor<float>&, int);
template double cross_entropy_loss(const Tensor<double>&, int);

}  // namespace fsfl
