#include "fsfl/autodiff.hpp"

#include <cmath>
#include <deque>

#include "fsfl/errors.hpp"

namespace fsfl {

template <typename T>
typename Tape<T>::Id Tape<T>::push(Tensor<T> value) {
  Slot s;
  s.grad = Tensor<T>(value.shape);
  s.value = std::move(value);
  slots_.push_back(std::move(s));
  return static_cast<Id>(slots_.size() - 1);
}

template <typename T>
typename Tape<T>::Id Tape<T>::leaf(Tensor<T> value, bool requires_grad) {
  const Id id = push(std::move(value));
  slots_[static_cast<size_t>(id)].requires_grad = requires_grad;
  slots_[static_cast<size_t>(id)].is_leaf = true;
  return id;
}

template <typename T>
void Tape<T>::record(std::vector<Id> inputs, std::vector<Id> outputs,
                     std::function<void()> back) {
  ops_.push_back(OpRecord{std::move(inputs), std::move(outputs), std::move(back)});
}

template <typename T>
typename Tape<T>::Id Tape<T>::dense(Id x, Id W, Id b) {
  const Id y = push(dense_forward(v(x), v(W), v(b)));
  record({x, W, b}, {y}, [this, x, W, b, y] {
    const Tensor<T>& xv = v(x);
    const Tensor<T>& wv = v(W);
    const Tensor<T>& dy = g(y);
    const int out = wv.dim(0), in = wv.dim(1);
    const int rows = xv.rank() == 2 ? xv.dim(0) : 1;
    Tensor<T>& dx = g(x);
    Tensor<T>& dw = g(W);
    Tensor<T>& db = g(b);
    for (int r = 0; r < rows; ++r) {
      const T* xr = xv.data.data() + static_cast<size_t>(r) * in;
      const T* dyr = dy.data.data() + static_cast<size_t>(r) * out;
      T* dxr = dx.data.data() + static_cast<size_t>(r) * in;
      for (int o = 0; o < out; ++o) {
        const T dyo = dyr[o];
        const T* wrow = wv.data.data() + static_cast<size_t>(o) * in;
        T* dwrow = dw.data.data() + static_cast<size_t>(o) * in;
        for (int i = 0; i < in; ++i) {
          dxr[i] += dyo * wrow[i];
          dwrow[i] += dyo * xr[i];
        }
        db.data[o] += dyo;
      }
    }
  });
  return y;
}

template <typename T>
typename Tape<T>::Id Tape<T>::relu_op(Id x) {
  const Id y = push(relu(v(x)));
  record({x}, {y}, [this, x, y] {
    const Tensor<T>& xv = v(x);
    const Tensor<T>& dy = g(y);
    Tensor<T>& dx = g(x);
    for (size_t i = 0; i < dx.data.size(); ++i) {
      if (xv.data[i] > T(0)) dx.data[i] += dy.data[i];
    }
  });
  return y;
}

template <typename T>
typename Tape<T>::Id Tape<T>::tanh_op(Id x) {
  const Id y = push(tanh_map(v(x)));
  record({x}, {y}, [this, x, y] {
    const Tensor<T>& yv = v(y);
    const Tensor<T>& dy = g(y);
    Tensor<T>& dx = g(x);
    for (size_t i = 0; i < dx.data.size(); ++i) {
      dx.data[i] += dy.data[i] * (T(1) - yv.data[i] * yv.data[i]);
    }
  });
  return y;
}

template <typename T>
typename Tape<T>::Id Tape<T>::sigmoid_op(Id x) {
  const Id y = push(sigmoid_map(v(x)));
  record({x}, {y}, [this, x, y] {
    const Tensor<T>& yv = v(y);
    const Tensor<T>& dy = g(y);
    Tensor<T>& dx = g(x);
    for (size_t i = 0; i < dx.data.size(); ++i) {
      dx.data[i] += dy.data[i] * yv.data[i] * (T(1) - yv.data[i]);
    }
  });
  return y;
}

namespace {
struct Bcl {
  int batch, channels, length;
};
template <typename T>
Bcl bcl(const Tensor<T>& x, int channels_expected) {
  if (x.rank() == 3) return {x.dim(0), x.dim(1), x.dim(2)};
  if (x.rank() == 2) return {1, x.dim(0), x.dim(1)};
  (void)channels_expected;
  return {1, 1, x.dim(0)};
}
}  // namespace

template <typename T>
typename Tape<T>::Id Tape<T>::conv1d(Id x, Id kernels, Id bias) {
  const Id y = push(conv1d_forward(v(x), v(kernels), v(bias)));
  record({x, kernels, bias}, {y}, [this, x, kernels, bias, y] {
    const Tensor<T>& xv = v(x);
    const Tensor<T>& kv = v(kernels);
    const Tensor<T>& dy = g(y);
    const int c_out = kv.dim(0), c_in = kv.dim(1), k = kv.dim(2);
    const int pad = (k - 1) / 2;
    const Bcl s = bcl(xv, c_in);
    Tensor<T>& dx = g(x);
    Tensor<T>& dk = g(kernels);
    Tensor<T>& db = g(bias);
    const int L = s.length;
    for (int b = 0; b < s.batch; ++b) {
      const T* xb = xv.data.data() + static_cast<size_t>(b) * c_in * L;
      const T* dyb = dy.data.data() + static_cast<size_t>(b) * c_out * L;
      T* dxb = dx.data.data() + static_cast<size_t>(b) * c_in * L;
      for (int co = 0; co < c_out; ++co) {
        for (int q = 0; q < L; ++q) {
          const T dyv = dyb[static_cast<size_t>(co) * L + q];
          db.data[co] += dyv;
          for (int ci = 0; ci < c_in; ++ci) {
            const T* krow = kv.data.data() + (static_cast<size_t>(co) * c_in + ci) * k;
            T* dkrow = dk.data.data() + (static_cast<size_t>(co) * c_in + ci) * k;
            for (int t = 0; t < k; ++t) {
              const int p = q + t - pad;
              if (p >= 0 && p < L) {
                dxb[static_cast<size_t>(ci) * L + p] += dyv * krow[t];
                dkrow[t] += dyv * xb[static_cast<size_t>(ci) * L + p];
              }
            }
          }
        }
      }
    }
  });
  return y;
}

template <typename T>
typename Tape<T>::Id Tape<T>::conv1d_transpose(Id h, Id kernels, Id bias) {
  const Id y = push(conv1d_transpose_forward(v(h), v(kernels), v(bias)));
  record({h, kernels, bias}, {y}, [this, h, kernels, bias, y] {
    const Tensor<T>& hv = v(h);
    const Tensor<T>& kv = v(kernels);
    const Tensor<T>& dy = g(y);
    const int c_in = kv.dim(0), c_out = kv.dim(1), k = kv.dim(2);
    const int pad = (k - 1) / 2;
    const Bcl s = bcl(hv, c_in);
    Tensor<T>& dh = g(h);
    Tensor<T>& dk = g(kernels);
    Tensor<T>& db = g(bias);
    const int L = s.length;
    for (int b = 0; b < s.batch; ++b) {
      const T* hb = hv.data.data() + static_cast<size_t>(b) * c_in * L;
      const T* dyb = dy.data.data() + static_cast<size_t>(b) * c_out * L;
      T* dhb = dh.data.data() + static_cast<size_t>(b) * c_in * L;
      for (int co = 0; co < c_out; ++co) {
        for (int r = 0; r < L; ++r) {
          const T dyv = dyb[static_cast<size_t>(co) * L + r];
          db.data[co] += dyv;
          for (int ci = 0; ci < c_in; ++ci) {
            const T* krow = kv.data.data() + (static_cast<size_t>(ci) * c_out + co) * k;
            T* dkrow = dk.data.data() + (static_cast<size_t>(ci) * c_out + co) * k;
            for (int t = 0; t < k; ++t) {
              const int p = r - t + pad;
              if (p >= 0 && p < L) {
                dhb[static_cast<size_t>(ci) * L + p] += dyv * krow[t];
                dkrow[t] += dyv * hb[static_cast<size_t>(ci) * L + p];
              }
            }
          }
        }
      }
    }
  });
  return y;
}

template <typename T>
typename Tape<T>::Id Tape<T>::batchnorm_train(Id x, Id gamma, Id beta,
                                              Tensor<T>& running_mean,
                                              Tensor<T>& running_var) {
  BatchNormBatchStats<T> stats;
  const Id y = push(batchnorm1d_forward(v(x), v(gamma), v(beta), running_mean, running_var,
                                        BatchNormMode::Train, &stats));
  record({x, gamma, beta}, {y}, [this, x, gamma, beta, y, stats] {
    const Tensor<T>& xv = v(x);
    const Tensor<T>& gv = v(gamma);
    const Tensor<T>& dy = g(y);
    const Bcl s = bcl(xv, gv.dim(0));
    const int C = s.channels, L = s.length, B = s.batch;
    const double n = static_cast<double>(B) * L;
    Tensor<T>& dx = g(x);
    Tensor<T>& dgamma = g(gamma);
    Tensor<T>& dbeta = g(beta);
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(stats.var.data[c]) + kBatchNormEps);
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int b = 0; b < B; ++b) {
        const size_t base = (static_cast<size_t>(b) * C + c) * L;
        for (int l = 0; l < L; ++l) {
          const double xhat = (xv.data[base + l] - stats.mean.data[c]) * inv;
          sum_dy += dy.data[base + l];
          sum_dy_xhat += dy.data[base + l] * xhat;
        }
      }
      dgamma.data[c] += static_cast<T>(sum_dy_xhat);
      dbeta.data[c] += static_cast<T>(sum_dy);
      const double gi = static_cast<double>(gv.data[c]) * inv;
      for (int b = 0; b < B; ++b) {
        const size_t base = (static_cast<size_t>(b) * C + c) * L;
        for (int l = 0; l < L; ++l) {
          const double xhat = (xv.data[base + l] - stats.mean.data[c]) * inv;
          dx.data[base + l] += static_cast<T>(
              gi * (dy.data[base + l] - sum_dy / n - xhat * sum_dy_xhat / n));
        }
      }
    }
  });
  return y;
}

template <typename T>
typename Tape<T>::Id Tape<T>::batchnorm_eval(Id x, Id gamma, Id beta,
                                             const Tensor<T>& running_mean,
                                             const Tensor<T>& running_var) {
  Tensor<T> rm = running_mean;
  Tensor<T> rv = running_var;
  const Id y = push(batchnorm1d_forward(v(x), v(gamma), v(beta), rm, rv, BatchNormMode::Eval));
  record({x, gamma, beta}, {y}, [this, x, gamma, beta, y, rm, rv] {
    const Tensor<T>& xv = v(x);
    const Tensor<T>& gv = v(gamma);
    const Tensor<T>& dy = g(y);
    const Bcl s = bcl(xv, gv.dim(0));
    const int C = s.channels, L = s.length, B = s.batch;
    Tensor<T>& dx = g(x);
    Tensor<T>& dgamma = g(gamma);
    Tensor<T>& dbeta = g(beta);
    for (int c = 0; c < C; ++c) {
      const double inv = 1.0 / std::sqrt(static_cast<double>(rv.data[c]) + kBatchNormEps);
      for (int b = 0; b < B; ++b) {
        const size_t base = (static_cast<size_t>(b) * C + c) * L;
        for (int l = 0; l < L; ++l) {
          const double xhat = (xv.data[base + l] - rm.data[c]) * inv;
          dgamma.data[c] += static_cast<T>(dy.data[base + l] * xhat);
          dbeta.data[c] += dy.data[base + l];
          dx.data[base + l] += static_cast<T>(dy.data[base + l] * gv.data[c] * inv);
        }
      }
    }
  });
  return y;
}

template <typename T>
typename Tape<T>::Id Tape<T>::reshape(Id x, std::vector<int> new_shape) {
  if (Tensor<T>::checked_numel(new_shape) != v(x).numel()) {
    throw ShapeError("reshape: " + v(x).shape_str() + " to " +
                     Tensor<T>::shape_str(new_shape));
  }
  Tensor<T> out(std::move(new_shape), v(x).data);
  const Id y = push(std::move(out));
  record({x}, {y}, [this, x, y] {
    const Tensor<T>& dy = g(y);
    Tensor<T>& dx = g(x);
    for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] += dy.data[i];
  });
  return y;
}

template <typename T>
std::pair<typename Tape<T>::Id, typename Tape<T>::Id> Tape<T>::lstm_step(
    Id x, Id h, Id c, const LstmParamIds& p) {
  LstmCellParams<T> cell;
  cell.Wi = v(p.Wi); cell.Ui = v(p.Ui); cell.bi = v(p.bi);
  cell.Wf = v(p.Wf); cell.Uf = v(p.Uf); cell.bf = v(p.bf);
  cell.Wg = v(p.Wg); cell.Ug = v(p.Ug); cell.bg = v(p.bg);
  cell.Wo = v(p.Wo); cell.Uo = v(p.Uo); cell.bo = v(p.bo);
  cell.hidden_dim = cell.Wi.dim(0);
  cell.input_dim = cell.Wi.dim(1);
  LstmStepTrace<T> trace;
  LstmState<T> next = fsfl::lstm_step(v(x), LstmState<T>{v(h), v(c)}, cell, &trace);
  const Id hn = push(std::move(next.h));
  const Id cn = push(std::move(next.c));
  record({x, h, c, p.Wi, p.Ui, p.bi, p.Wf, p.Uf, p.bf, p.Wg, p.Ug, p.bg, p.Wo, p.Uo, p.bo},
         {hn, cn}, [this, x, h, c, p, hn, cn, trace] {
    const Tensor<T>& xv = v(x);
    const Tensor<T>& hv = v(h);
    const Tensor<T>& cv = v(c);
    const Tensor<T>& dh_next = g(hn);
    const Tensor<T>& dc_next = g(cn);
    const int in = v(p.Wi).dim(1);
    const int hid = v(p.Wi).dim(0);
    const int rows = xv.rank() == 2 ? xv.dim(0) : 1;

    // Per-element pre-activation gradients for the four gates.
    Tensor<T> da_i(trace.i.shape), da_f(trace.i.shape), da_g(trace.i.shape),
        da_o(trace.i.shape);
    Tensor<T>& dc_prev = g(c);
    for (size_t idx = 0; idx < trace.i.data.size(); ++idx) {
      const T tc = trace.tanh_c.data[idx];
      const T dct = dc_next.data[idx] +
                    dh_next.data[idx] * trace.o.data[idx] * (T(1) - tc * tc);
      const T i_ = trace.i.data[idx], f_ = trace.f.data[idx];
      const T g_ = trace.g.data[idx], o_ = trace.o.data[idx];
      da_o.data[idx] = dh_next.data[idx] * tc * o_ * (T(1) - o_);
      da_i.data[idx] = dct * g_ * i_ * (T(1) - i_);
      da_f.data[idx] = dct * cv.data[idx] * f_ * (T(1) - f_);
      da_g.data[idx] = dct * i_ * (T(1) - g_ * g_);
      dc_prev.data[idx] += dct * f_;
    }

    // Propagate each gate's affine part: a = W x + U h + b.
    auto accumulate = [&](const Tensor<T>& da, Id Wid, Id Uid, Id bid) {
      const Tensor<T>& Wv = v(Wid);
      const Tensor<T>& Uv = v(Uid);
      Tensor<T>& dW = g(Wid);
      Tensor<T>& dU = g(Uid);
      Tensor<T>& db = g(bid);
      Tensor<T>& dx = g(x);
      Tensor<T>& dh_prev = g(h);
      for (int r = 0; r < rows; ++r) {
        const T* dar = da.data.data() + static_cast<size_t>(r) * hid;
        const T* xr = xv.data.data() + static_cast<size_t>(r) * in;
        const T* hr = hv.data.data() + static_cast<size_t>(r) * hid;
        T* dxr = dx.data.data() + static_cast<size_t>(r) * in;
        T* dhr = dh_prev.data.data() + static_cast<size_t>(r) * hid;
        for (int u = 0; u < hid; ++u) {
          const T d = dar[u];
          const T* wrow = Wv.data.data() + static_cast<size_t>(u) * in;
          T* dwrow = dW.data.data() + static_cast<size_t>(u) * in;
          for (int i = 0; i < in; ++i) {
            dxr[i] += d * wrow[i];
            dwrow[i] += d * xr[i];
          }
          const T* urow = Uv.data.data() + static_cast<size_t>(u) * hid;
          T* durow = dU.data.data() + static_cast<size_t>(u) * hid;
          for (int j = 0; j < hid; ++j) {
            dhr[j] += d * urow[j];
            durow[j] += d * hr[j];
          }
          db.data[u] += d;
        }
      }
    };
    accumulate(da_i, p.Wi, p.Ui, p.bi);
    accumulate(da_f, p.Wf, p.Uf, p.bf);
    accumulate(da_g, p.Wg, p.Ug, p.bg);
    accumulate(da_o, p.Wo, p.Uo, p.bo);
  });
  return {hn, cn};
}

template <typename T>
typename Tape<T>::Id Tape<T>::softmax_op(Id z) {
  const Id y = push(softmax(v(z)));
  record({z}, {y}, [this, z, y] {
    const Tensor<T>& p = v(y);
    const Tensor<T>& dy = g(y);
    Tensor<T>& dz = g(z);
    const int rows = p.rank() == 2 ? p.dim(0) : 1;
    const int k = p.rank() == 2 ? p.dim(1) : p.dim(0);
    for (int r = 0; r < rows; ++r) {
      const T* pr = p.data.data() + static_cast<size_t>(r) * k;
      const T* dyr = dy.data.data() + static_cast<size_t>(r) * k;
      T* dzr = dz.data.data() + static_cast<size_t>(r) * k;
      T dot = T(0);
      for (int j = 0; j < k; ++j) dot += dyr[j] * pr[j];
      for (int j = 0; j < k; ++j) dzr[j] += pr[j] * (dyr[j] - dot);
    }
  });
  return y;
}

template <typename T>
typename Tape<T>::Id Tape<T>::cross_entropy(Id probs, std::vector<int> labels) {
  const Tensor<T>& p = v(probs);
  const int rows = p.rank() == 2 ? p.dim(0) : 1;
  const int k = p.rank() == 2 ? p.dim(1) : p.dim(0);
  if (static_cast<int>(labels.size()) != rows) {
    throw ShapeError("cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                     std::to_string(rows) + " probability rows");
  }
  double acc = 0.0;
  for (int r = 0; r < rows; ++r) {
    const int y = labels[static_cast<size_t>(r)];
    if (y < 0 || y >= k) {
      throw DataError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                      std::to_string(k) + ") at row " + std::to_string(r));
    }
    acc += -std::log(std::max(static_cast<double>(p.data[static_cast<size_t>(r) * k + y]),
                              kLogClamp));
  }
  const Id out = push(Tensor<T>({1}, {static_cast<T>(acc / rows)}));
  record({probs}, {out}, [this, probs, out, labels, rows, k] {
    const Tensor<T>& p = v(probs);
    const T dl = g(out).data[0];
    Tensor<T>& dp = g(probs);
    for (int r = 0; r < rows; ++r) {
      const size_t at = static_cast<size_t>(r) * k + labels[static_cast<size_t>(r)];
      if (static_cast<double>(p.data[at]) >= kLogClamp) {
        dp.data[at] += -dl / (static_cast<T>(rows) * p.data[at]);
      }
    }
  });
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::mse(Id x, Tensor<T> target) {
  require_same_shape(v(x), target, "mse");
  const Id out = push(Tensor<T>({1}, {mse_loss(v(x), target)}));
  record({x}, {out}, [this, x, out, target = std::move(target)] {
    const Tensor<T>& xv = v(x);
    const T dl = g(out).data[0];
    Tensor<T>& dx = g(x);
    const T scale = T(2) / static_cast<T>(xv.numel());
    for (size_t i = 0; i < dx.data.size(); ++i) {
      dx.data[i] += dl * scale * (xv.data[i] - target.data[i]);
    }
  });
  return out;
}

template <typename T>
typename Tape<T>::Id Tape<T>::average(const std::vector<Id>& xs) {
  if (xs.empty()) throw ShapeError("average: empty node list");
  double acc = 0.0;
  for (Id id : xs) {
    if (v(id).numel() != 1) {
      throw ShapeError("average: node is not scalar, shape " + v(id).shape_str());
    }
    acc += v(id).data[0];
  }
  const Id out = push(Tensor<T>({1}, {static_cast<T>(acc / static_cast<double>(xs.size()))}));
  record(xs, {out}, [this, xs, out] {
    const T d = g(out).data[0] / static_cast<T>(xs.size());
    for (Id id : xs) g(id).data[0] += d;
  });
  return out;
}

template <typename T>
typename Tape<T>::BackwardResult Tape<T>::backward(Id loss) {
  if (v(loss).numel() != 1) {
    throw ShapeError("backward: loss must be scalar, shape " + v(loss).shape_str());
  }
  for (auto& s : slots_) {
    for (auto& gv : s.grad.data) gv = T(0);
  }
  g(loss).data[0] = T(1);
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) it->back();

  // Reachability from the loss, walking ops in reverse: a disconnected
  // parameter is reported, not an error.
  std::vector<char> reached(slots_.size(), 0);
  reached[static_cast<size_t>(loss)] = 1;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    bool any = false;
    for (Id o : it->outputs) any = any || reached[static_cast<size_t>(o)];
    if (any) {
      for (Id i : it->inputs) reached[static_cast<size_t>(i)] = 1;
    }
  }
  BackwardResult res;
  for (size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].is_leaf && slots_[i].requires_grad && !reached[i]) {
      res.disconnected.push_back(static_cast<Id>(i));
    }
  }
  return res;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace fsfl
