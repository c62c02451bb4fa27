#include "fsfl/models.hpp"

#include <algorithm>
#include <cmath>

#include "fsfl/adam.hpp"
#include "fsfl/autodiff.hpp"
#include "fsfl/errors.hpp"
#include "fsfl/layers.hpp"

namespace fsfl {

const char* to_string(AeVariant v) {
  switch (v) {
    case AeVariant::FC: return "FC";
    case AeVariant::CNN: return "CNN";
    case AeVariant::LSTM: return "LSTM";
  }
  return "?";
}

const char* to_string(HeadKind h) {
  return h == HeadKind::SOFTMAX ? "SOFTMAX" : "LSTM";
}

void BaggingPolicy::validate() const {
  if (batch_min < 1 || batch_min > batch_max || seq_min < 1 || seq_min > seq_max) {
    throw ConfigError("bagging policy: need 1 <= min <= max, got batch [" +
                      std::to_string(batch_min) + "," + std::to_string(batch_max) +
                      "] seq [" + std::to_string(seq_min) + "," + std::to_string(seq_max) +
                      "]");
  }
}

void ModelParams::add(std::string name, TensorF value) {
  tensors.push_back(NamedTensor{std::move(name), std::move(value)});
}

TensorF& ModelParams::at(std::string_view name) {
  for (auto& t : tensors)
    if (t.name == name) return t.value;
  throw ConfigError("model: no tensor named '" + std::string(name) + "'");
}

const TensorF& ModelParams::at(std::string_view name) const {
  return const_cast<ModelParams*>(this)->at(name);
}

bool ModelParams::has(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return true;
  return false;
}

size_t ModelParams::param_count() const {
  size_t n = 0;
  for (const auto& t : tensors) n += t.value.numel();
  return n;
}

size_t ModelParams::byte_size() const { return param_count() * sizeof(float); }

bool ModelParams::is_trainable(std::string_view name) {
  return name.find("running_") == std::string_view::npos;
}

namespace {

// Glorot-uniform bound from the tensor's own shape: [out,in] matrices use
// (in, out), rank-3 kernels use (dim1*k, dim0*k), vectors use (n, n).
void glorot_fill(TensorF& t, Rng& rng) {
  double fan_in = 1.0, fan_out = 1.0;
  if (t.rank() == 2) {
    fan_in = t.dim(1);
    fan_out = t.dim(0);
  } else if (t.rank() == 3) {
    fan_in = static_cast<double>(t.dim(1)) * t.dim(2);
    fan_out = static_cast<double>(t.dim(0)) * t.dim(2);
  } else {
    fan_in = fan_out = t.dim(0);
  }
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.data) v = static_cast<float>(rng.uniform(-bound, bound));
}

void add_init(ModelParams& mp, std::string name, std::vector<int> shape, Rng& rng) {
  TensorF t(std::move(shape));
  glorot_fill(t, rng);
  mp.add(std::move(name), std::move(t));
}

const char* kGateNames[12] = {"Wi", "Ui", "bi", "Wf", "Uf", "bf",
                              "Wg", "Ug", "bg", "Wo", "Uo", "bo"};

void add_lstm_cell(ModelParams& mp, const std::string& prefix, int in, int hid, Rng& rng) {
  for (int gi = 0; gi < 4; ++gi) {
    add_init(mp, prefix + "." + kGateNames[gi * 3 + 0], {hid, in}, rng);
    add_init(mp, prefix + "." + kGateNames[gi * 3 + 1], {hid, hid}, rng);
    add_init(mp, prefix + "." + kGateNames[gi * 3 + 2], {hid}, rng);
  }
}

LstmCellParams<float> cell_view(const ModelParams& mp, const std::string& prefix) {
  LstmCellParams<float> p;
  p.Wi = mp.at(prefix + ".Wi"); p.Ui = mp.at(prefix + ".Ui"); p.bi = mp.at(prefix + ".bi");
  p.Wf = mp.at(prefix + ".Wf"); p.Uf = mp.at(prefix + ".Uf"); p.bf = mp.at(prefix + ".bf");
  p.Wg = mp.at(prefix + ".Wg"); p.Ug = mp.at(prefix + ".Ug"); p.bg = mp.at(prefix + ".bg");
  p.Wo = mp.at(prefix + ".Wo"); p.Uo = mp.at(prefix + ".Uo"); p.bo = mp.at(prefix + ".bo");
  p.hidden_dim = p.Wi.dim(0);
  p.input_dim = p.Wi.dim(1);
  return p;
}

// Leafs every trainable tensor onto the tape, ids parallel to mp.tensors.
std::vector<int> leaf_params(TapeF& tape, const ModelParams& mp) {
  std::vector<int> ids(mp.tensors.size(), -1);
  for (size_t i = 0; i < mp.tensors.size(); ++i) {
    if (ModelParams::is_trainable(mp.tensors[i].name)) {
      ids[i] = tape.leaf(mp.tensors[i].value, /*requires_grad=*/true);
    }
  }
  return ids;
}

int id_of(const ModelParams& mp, const std::vector<int>& ids, std::string_view name) {
  for (size_t i = 0; i < mp.tensors.size(); ++i) {
    if (mp.tensors[i].name == name) return ids[i];
  }
  throw ConfigError("model: no tensor named '" + std::string(name) + "'");
}

LstmParamIds lstm_ids(const ModelParams& mp, const std::vector<int>& ids,
                      const std::string& prefix) {
  LstmParamIds p{};
  p.Wi = id_of(mp, ids, prefix + ".Wi"); p.Ui = id_of(mp, ids, prefix + ".Ui");
  p.bi = id_of(mp, ids, prefix + ".bi");
  p.Wf = id_of(mp, ids, prefix + ".Wf"); p.Uf = id_of(mp, ids, prefix + ".Uf");
  p.bf = id_of(mp, ids, prefix + ".bf");
  p.Wg = id_of(mp, ids, prefix + ".Wg"); p.Ug = id_of(mp, ids, prefix + ".Ug");
  p.bg = id_of(mp, ids, prefix + ".bg");
  p.Wo = id_of(mp, ids, prefix + ".Wo"); p.Uo = id_of(mp, ids, prefix + ".Uo");
  p.bo = id_of(mp, ids, prefix + ".bo");
  return p;
}

using detail::SeqBatch;
using detail::SeqRef;

}  // namespace

namespace detail {

std::vector<SeqBatch> plan_epoch(const std::vector<const TensorF*>& windows,
                                 const BaggingPolicy& policy, Rng& rng) {
  std::vector<SeqBatch> plan;
  size_t w = 0;
  int offset = 0;
  while (w < windows.size()) {
    const int b = rng.uniform_int(policy.batch_min, policy.batch_max);
    const int s = rng.uniform_int(policy.seq_min, policy.seq_max);
    SeqBatch batch;
    batch.seq_len = s;
    while (batch.num_seqs() < b && w < windows.size()) {
      const int rows = windows[w]->dim(0);
      if (rows < s) {
        // Window shorter than the drawn length: its remainder becomes a
        // single shorter sequence in a batch of its own.
        if (batch.num_seqs() > 0) break;
        batch.seq_len = rows - offset;
        batch.seqs.push_back(SeqRef{static_cast<int>(w), offset});
        ++w;
        offset = 0;
        break;
      }
      if (offset + s <= rows) {
        batch.seqs.push_back(SeqRef{static_cast<int>(w), offset});
        offset += s;
        if (offset == rows) {
          ++w;
          offset = 0;
        }
      } else {
        // Tail: anchor the last sequence to the window end (rows >= s here).
        batch.seqs.push_back(SeqRef{static_cast<int>(w), rows - s});
        ++w;
        offset = 0;
      }
    }
    if (batch.num_seqs() > 0) plan.push_back(std::move(batch));
  }
  return plan;
}

}  // namespace detail

namespace {

using detail::plan_epoch;

// All rows of the batch, sequence-major: [num_seqs * seq_len, nf].
TensorF gather_rows(const std::vector<const TensorF*>& windows, const SeqBatch& b) {
  const int nf = windows[static_cast<size_t>(b.seqs[0].window)]->dim(1);
  TensorF out({b.rows(), nf});
  for (int j = 0; j < b.num_seqs(); ++j) {
    const SeqRef& ref = b.seqs[static_cast<size_t>(j)];
    const TensorF& src = *windows[static_cast<size_t>(ref.window)];
    std::copy_n(src.data.begin() + static_cast<size_t>(ref.start_row) * nf,
                static_cast<size_t>(b.seq_len) * nf,
                out.data.begin() + static_cast<size_t>(j) * b.seq_len * nf);
  }
  return out;
}

// Rows of step t across the batch's sequences: [num_seqs, nf].
TensorF gather_step(const std::vector<const TensorF*>& windows, const SeqBatch& b, int t) {
  const int nf = windows[static_cast<size_t>(b.seqs[0].window)]->dim(1);
  TensorF out({b.num_seqs(), nf});
  for (int j = 0; j < b.num_seqs(); ++j) {
    const SeqRef& ref = b.seqs[static_cast<size_t>(j)];
    const TensorF& src = *windows[static_cast<size_t>(ref.window)];
    std::copy_n(src.data.begin() + (static_cast<size_t>(ref.start_row) + t) * nf, nf,
                out.data.begin() + static_cast<size_t>(j) * nf);
  }
  return out;
}

TapeF::Id ae_batch_loss(TapeF& tape, Autoencoder& ae, const std::vector<int>& ids,
                        const std::vector<const TensorF*>& windows, const SeqBatch& b) {
  const int nf = ae.spec.input_dim;
  switch (ae.spec.variant) {
    case AeVariant::FC: {
      TensorF x = gather_rows(windows, b);
      const int xid = tape.leaf(x);
      const int h = tape.tanh_op(
          tape.dense(xid, id_of(ae.params, ids, "enc.dense.W"), id_of(ae.params, ids, "enc.dense.b")));
      const int rec = tape.dense(h, id_of(ae.params, ids, "dec.dense.W"),
                                 id_of(ae.params, ids, "dec.dense.b"));
      return tape.mse(rec, std::move(x));
    }
    case AeVariant::CNN: {
      TensorF x = gather_rows(windows, b);
      const int rows = b.rows();
      const int xid = tape.leaf(x);
      const int x3 = tape.reshape(xid, {rows, 1, nf});
      const int c = tape.conv1d(x3, id_of(ae.params, ids, "enc.conv.K"),
                                id_of(ae.params, ids, "enc.conv.b"));
      const int bn = tape.batchnorm_train(c, id_of(ae.params, ids, "enc.bn.gamma"),
                                          id_of(ae.params, ids, "enc.bn.beta"),
                                          ae.params.at("enc.bn.running_mean"),
                                          ae.params.at("enc.bn.running_var"));
      const int r = tape.relu_op(bn);
      const int flat = tape.reshape(r, {rows, 8 * nf});
      const int h = tape.dense(flat, id_of(ae.params, ids, "enc.dense.W"),
                               id_of(ae.params, ids, "enc.dense.b"));
      const int up = tape.dense(h, id_of(ae.params, ids, "dec.dense.W"),
                                id_of(ae.params, ids, "dec.dense.b"));
      const int up3 = tape.reshape(up, {rows, 8, nf});
      const int rec3 = tape.conv1d_transpose(up3, id_of(ae.params, ids, "dec.convt.K"),
                                             id_of(ae.params, ids, "dec.convt.b"));
      const int rec = tape.reshape(rec3, {rows, nf});
      return tape.mse(rec, std::move(x));
    }
    case AeVariant::LSTM: {
      const int d = ae.spec.repr_dim;
      const LstmParamIds enc = lstm_ids(ae.params, ids, "enc.lstm");
      const LstmParamIds dec = lstm_ids(ae.params, ids, "dec.lstm");
      int h = tape.leaf(TensorF({b.num_seqs(), d}));
      int c = tape.leaf(TensorF({b.num_seqs(), d}));
      std::vector<TensorF> steps(static_cast<size_t>(b.seq_len));
      for (int t = 0; t < b.seq_len; ++t) {
        steps[static_cast<size_t>(t)] = gather_step(windows, b, t);
        const int xt = tape.leaf(steps[static_cast<size_t>(t)]);
        auto [hn, cn] = tape.lstm_step(xt, h, c, enc);
        h = hn;
        c = cn;
      }
      // Decode from the final representation, repeated; target is the
      // reversed input sequence.
      int dh = tape.leaf(TensorF({b.num_seqs(), nf}));
      int dc = tape.leaf(TensorF({b.num_seqs(), nf}));
      std::vector<int> losses;
      losses.reserve(static_cast<size_t>(b.seq_len));
      for (int t = 0; t < b.seq_len; ++t) {
        auto [hn, cn] = tape.lstm_step(h, dh, dc, dec);
        dh = hn;
        dc = cn;
        losses.push_back(tape.mse(dh, steps[static_cast<size_t>(b.seq_len - 1 - t)]));
      }
      return tape.average(losses);
    }
  }
  throw ConfigError("ae_batch_loss: unknown variant");
}

TapeF::Id cls_batch_loss(TapeF& tape, Classifier& cls, const std::vector<int>& ids,
                         const std::vector<const TensorF*>& windows,
                         const std::vector<const std::vector<int>*>& window_labels,
                         const SeqBatch& b) {
  const int wId = id_of(cls.params, ids, "head.dense.W");
  const int bId = id_of(cls.params, ids, "head.dense.b");
  auto labels_at_step = [&](int t) {
    std::vector<int> ys(static_cast<size_t>(b.num_seqs()));
    for (int j = 0; j < b.num_seqs(); ++j) {
      const SeqRef& ref = b.seqs[static_cast<size_t>(j)];
      ys[static_cast<size_t>(j)] =
          (*window_labels[static_cast<size_t>(ref.window)])[static_cast<size_t>(ref.start_row + t)];
    }
    return ys;
  };
  if (cls.spec.head == HeadKind::SOFTMAX) {
    const int xid = tape.leaf(gather_rows(windows, b));
    const int probs = tape.softmax_op(tape.dense(xid, wId, bId));
    std::vector<int> ys;
    ys.reserve(static_cast<size_t>(b.rows()));
    for (int j = 0; j < b.num_seqs(); ++j) {
      const SeqRef& ref = b.seqs[static_cast<size_t>(j)];
      const std::vector<int>& lab = *window_labels[static_cast<size_t>(ref.window)];
      ys.insert(ys.end(), lab.begin() + ref.start_row, lab.begin() + ref.start_row + b.seq_len);
    }
    return tape.cross_entropy(probs, std::move(ys));
  }
  const LstmParamIds cell = lstm_ids(cls.params, ids, "lstm");
  const int hid = cls.spec.effective_hidden();
  int h = tape.leaf(TensorF({b.num_seqs(), hid}));
  int c = tape.leaf(TensorF({b.num_seqs(), hid}));
  std::vector<int> losses;
  losses.reserve(static_cast<size_t>(b.seq_len));
  for (int t = 0; t < b.seq_len; ++t) {
    const int xt = tape.leaf(gather_step(windows, b, t));
    auto [hn, cn] = tape.lstm_step(xt, h, c, cell);
    h = hn;
    c = cn;
    const int probs = tape.softmax_op(tape.dense(h, wId, bId));
    losses.push_back(tape.cross_entropy(probs, labels_at_step(t)));
  }
  return tape.average(losses);
}

// Shared Adam-over-tape driver: one optimizer step per bagged batch.
template <typename LossFn>
void train_batches(ModelParams& mp, const std::vector<SeqBatch>& plan, float lr,
                   AdamState& state, TrainStatus* status, LossFn&& loss_fn) {
  for (const SeqBatch& b : plan) {
    TapeF tape;
    const std::vector<int> ids = leaf_params(tape, mp);
    const TapeF::Id loss = loss_fn(tape, ids, b);
    tape.backward(loss);
    std::vector<TensorF*> params;
    std::vector<const TensorF*> grads;
    for (size_t i = 0; i < mp.tensors.size(); ++i) {
      if (ids[i] >= 0) {
        params.push_back(&mp.tensors[i].value);
        grads.push_back(&tape.grad(ids[i]));
      }
    }
    // Sync the tape's leaf copies back is not needed: leaves were copies and
    // adam_step updates the owning ModelParams directly.
    adam_step(params, grads, state, lr);
    if (status) {
      status->batches += 1;
      status->last_loss = tape.val(loss).data[0];
    }
  }
}

AdamState adam_for(const ModelParams& mp) {
  std::vector<const TensorF*> ptrs;
  for (const auto& t : mp.tensors) {
    if (ModelParams::is_trainable(t.name)) ptrs.push_back(&t.value);
  }
  return AdamState::init_like(ptrs);
}

}  // namespace

Autoencoder build_autoencoder(const AutoencoderSpec& spec, uint64_t seed) {
  if (spec.input_dim < 2 || spec.repr_dim < 1 || spec.repr_dim >= spec.input_dim) {
    throw ConfigError("autoencoder: need 1 <= repr_dim < input_dim, got repr_dim " +
                      std::to_string(spec.repr_dim) + ", input_dim " +
                      std::to_string(spec.input_dim));
  }
  Rng rng = tagged_rng(seed, RngTag::ModelInit, static_cast<uint64_t>(spec.variant));
  Autoencoder ae;
  ae.spec = spec;
  const int nf = spec.input_dim, d = spec.repr_dim;
  switch (spec.variant) {
    case AeVariant::FC:
      add_init(ae.params, "enc.dense.W", {d, nf}, rng);
      add_init(ae.params, "enc.dense.b", {d}, rng);
      add_init(ae.params, "dec.dense.W", {nf, d}, rng);
      add_init(ae.params, "dec.dense.b", {nf}, rng);
      break;
    case AeVariant::CNN:
      add_init(ae.params, "enc.conv.K", {8, 1, 3}, rng);
      add_init(ae.params, "enc.conv.b", {8}, rng);
      ae.params.add("enc.bn.gamma", TensorF::full({8}, 1.0f));
      ae.params.add("enc.bn.beta", TensorF({8}));
      ae.params.add("enc.bn.running_mean", TensorF({8}));
      ae.params.add("enc.bn.running_var", TensorF::full({8}, 1.0f));
      add_init(ae.params, "enc.dense.W", {d, 8 * nf}, rng);
      add_init(ae.params, "enc.dense.b", {d}, rng);
      add_init(ae.params, "dec.dense.W", {8 * nf, d}, rng);
      add_init(ae.params, "dec.dense.b", {8 * nf}, rng);
      add_init(ae.params, "dec.convt.K", {8, 1, 3}, rng);
      add_init(ae.params, "dec.convt.b", {1}, rng);
      break;
    case AeVariant::LSTM:
      add_lstm_cell(ae.params, "enc.lstm", nf, d, rng);
      add_lstm_cell(ae.params, "dec.lstm", d, nf, rng);
      break;
  }
  return ae;
}

Classifier build_classifier(const ClassifierSpec& spec, uint64_t seed) {
  if (spec.num_classes < 2) {
    throw ConfigError("classifier: num_classes must be >= 2, got " +
                      std::to_string(spec.num_classes));
  }
  if (spec.input_dim < 1) {
    throw ConfigError("classifier: input_dim must be >= 1, got " +
                      std::to_string(spec.input_dim));
  }
  Rng rng = tagged_rng(seed, RngTag::ModelInit, 100 + static_cast<uint64_t>(spec.head));
  Classifier cls;
  cls.spec = spec;
  // The output head starts at zero (uniform class probabilities); its argmax
  // then follows the accumulated gradient direction from the first server
  // epochs instead of having to fight a random initial direction.
  if (spec.head == HeadKind::LSTM) {
    add_lstm_cell(cls.params, "lstm", spec.input_dim, spec.effective_hidden(), rng);
    cls.params.add("head.dense.W", TensorF({spec.num_classes, spec.effective_hidden()}));
  } else {
    cls.params.add("head.dense.W", TensorF({spec.num_classes, spec.input_dim}));
  }
  cls.params.add("head.dense.b", TensorF({spec.num_classes}));
  return cls;
}

TensorF encode(const Autoencoder& ae, const TensorF& window) {
  if (window.rank() != 2 || window.dim(1) != ae.spec.input_dim) {
    throw ShapeError("encode: window " + window.shape_str() + " vs input_dim " +
                     std::to_string(ae.spec.input_dim));
  }
  const int L = window.dim(0), nf = ae.spec.input_dim, d = ae.spec.repr_dim;
  switch (ae.spec.variant) {
    case AeVariant::FC:
      return tanh_map(
          dense_forward(window, ae.params.at("enc.dense.W"), ae.params.at("enc.dense.b")));
    case AeVariant::CNN: {
      TensorF x3({L, 1, nf});
      x3.data = window.data;
      TensorF rm = ae.params.at("enc.bn.running_mean");
      TensorF rv = ae.params.at("enc.bn.running_var");
      TensorF c = conv1d_forward(x3, ae.params.at("enc.conv.K"), ae.params.at("enc.conv.b"));
      TensorF bn = batchnorm1d_forward(c, ae.params.at("enc.bn.gamma"),
                                       ae.params.at("enc.bn.beta"), rm, rv,
                                       BatchNormMode::Eval);
      TensorF r = relu(bn);
      TensorF flat({L, 8 * nf});
      flat.data = std::move(r.data);
      return dense_forward(flat, ae.params.at("enc.dense.W"), ae.params.at("enc.dense.b"));
    }
    case AeVariant::LSTM: {
      const LstmCellParams<float> cell = cell_view(ae.params, "enc.lstm");
      LstmState<float> st = LstmState<float>::zeros(d);
      TensorF reps({L, d});
      for (int t = 0; t < L; ++t) {
        TensorF xt({nf});
        std::copy_n(window.data.begin() + static_cast<size_t>(t) * nf, nf, xt.data.begin());
        st = lstm_step(xt, st, cell);
        std::copy_n(st.h.data.begin(), d, reps.data.begin() + static_cast<size_t>(t) * d);
      }
      return reps;
    }
  }
  throw ConfigError("encode: unknown variant");
}

TensorF decode(const Autoencoder& ae, const TensorF& reps) {
  if (reps.rank() != 2 || reps.dim(1) != ae.spec.repr_dim) {
    throw ShapeError("decode: representations " + reps.shape_str() + " vs repr_dim " +
                     std::to_string(ae.spec.repr_dim));
  }
  const int L = reps.dim(0), nf = ae.spec.input_dim, d = ae.spec.repr_dim;
  switch (ae.spec.variant) {
    case AeVariant::FC:
      return dense_forward(reps, ae.params.at("dec.dense.W"), ae.params.at("dec.dense.b"));
    case AeVariant::CNN: {
      TensorF up = dense_forward(reps, ae.params.at("dec.dense.W"), ae.params.at("dec.dense.b"));
      TensorF up3({L, 8, nf});
      up3.data = std::move(up.data);
      TensorF rec3 =
          conv1d_transpose_forward(up3, ae.params.at("dec.convt.K"), ae.params.at("dec.convt.b"));
      TensorF rec({L, nf});
      rec.data = std::move(rec3.data);
      return rec;
    }
    case AeVariant::LSTM: {
      const LstmCellParams<float> cell = cell_view(ae.params, "dec.lstm");
      TensorF h_final({d});
      std::copy_n(reps.data.begin() + static_cast<size_t>(L - 1) * d, d, h_final.data.begin());
      LstmState<float> st = LstmState<float>::zeros(nf);
      TensorF rec({L, nf});
      for (int t = 0; t < L; ++t) {
        st = lstm_step(h_final, st, cell);
        std::copy_n(st.h.data.begin(), nf, rec.data.begin() + static_cast<size_t>(t) * nf);
      }
      return rec;
    }
  }
  throw ConfigError("decode: unknown variant");
}

std::vector<int> classify(const Classifier& cls, const TensorF& reps) {
  if (reps.rank() != 2 || reps.dim(1) != cls.spec.input_dim) {
    throw ShapeError("classify: input " + reps.shape_str() + " vs classifier input_dim " +
                     std::to_string(cls.spec.input_dim));
  }
  const int L = reps.dim(0);
  const TensorF& W = cls.params.at("head.dense.W");
  const TensorF& b = cls.params.at("head.dense.b");
  const int k = cls.spec.num_classes;
  auto argmax_row = [k](const float* row) {
    int best = 0;
    for (int j = 1; j < k; ++j)
      if (row[j] > row[best]) best = j;
    return best;
  };
  std::vector<int> out(static_cast<size_t>(L));
  if (cls.spec.head == HeadKind::SOFTMAX) {
    const TensorF logits = dense_forward(reps, W, b);
    for (int t = 0; t < L; ++t)
      out[static_cast<size_t>(t)] = argmax_row(logits.data.data() + static_cast<size_t>(t) * k);
    return out;
  }
  const LstmCellParams<float> cell = cell_view(cls.params, "lstm");
  LstmState<float> st = LstmState<float>::zeros(cls.spec.effective_hidden());
  const int in = cls.spec.input_dim;
  for (int t = 0; t < L; ++t) {
    TensorF xt({in});
    std::copy_n(reps.data.begin() + static_cast<size_t>(t) * in, in, xt.data.begin());
    st = lstm_step(xt, st, cell);
    const TensorF logits = dense_forward(st.h, W, b);
    out[static_cast<size_t>(t)] = argmax_row(logits.data.data());
  }
  return out;
}

Autoencoder ae_train_locally(Autoencoder ae, const std::vector<TensorF>& windows, float lr,
                             int epochs, const BaggingPolicy& policy, Rng rng,
                             TrainStatus* status) {
  policy.validate();
  if (ae.spec.variant == AeVariant::CNN && policy.batch_min < 2) {
    throw ConfigError("ae_train_locally: CNN variant needs batch_min >= 2, got " +
                      std::to_string(policy.batch_min));
  }
  size_t total = 0;
  for (const TensorF& w : windows) {
    if (w.rank() != 2 || w.dim(1) != ae.spec.input_dim) {
      throw ShapeError("ae_train_locally: window " + w.shape_str() + " vs input_dim " +
                       std::to_string(ae.spec.input_dim));
    }
    total += static_cast<size_t>(w.dim(0));
  }
  if (total == 0) {
    if (status) status->skipped_empty = true;
    return ae;
  }
  std::vector<const TensorF*> window_ptrs;
  window_ptrs.reserve(windows.size());
  for (const TensorF& w : windows) {
    if (w.dim(0) > 0) window_ptrs.push_back(&w);
  }
  AdamState state = adam_for(ae.params);
  for (int e = 0; e < epochs; ++e) {
    const std::vector<SeqBatch> plan = plan_epoch(window_ptrs, policy, rng);
    train_batches(ae.params, plan, lr, state, status,
                  [&](TapeF& tape, const std::vector<int>& ids, const SeqBatch& b) {
                    return ae_batch_loss(tape, ae, ids, window_ptrs, b);
                  });
  }
  return ae;
}

Classifier train_classifier(Classifier cls, const TensorF& features,
                            const std::vector<int>& labels, float lr, int epochs,
                            const BaggingPolicy& policy, Rng rng, TrainStatus* status) {
  return train_classifier_windows(std::move(cls), {features}, {labels}, lr, epochs, policy,
                                  rng, status);
}

Classifier train_classifier_windows(Classifier cls, const std::vector<TensorF>& windows,
                                    const std::vector<std::vector<int>>& window_labels,
                                    float lr, int epochs, const BaggingPolicy& policy,
                                    Rng rng, TrainStatus* status) {
  policy.validate();
  if (windows.size() != window_labels.size()) {
    throw DataError("train_classifier: " + std::to_string(windows.size()) + " windows vs " +
                    std::to_string(window_labels.size()) + " label windows");
  }
  size_t total = 0;
  for (size_t w = 0; w < windows.size(); ++w) {
    const TensorF& f = windows[w];
    if (f.rank() != 2 || f.dim(1) != cls.spec.input_dim) {
      throw ShapeError("train_classifier: features " + f.shape_str() +
                       " vs classifier input_dim " + std::to_string(cls.spec.input_dim));
    }
    if (static_cast<size_t>(f.dim(0)) != window_labels[w].size()) {
      throw DataError("train_classifier: " + std::to_string(f.dim(0)) + " feature rows vs " +
                      std::to_string(window_labels[w].size()) + " labels");
    }
    for (size_t i = 0; i < window_labels[w].size(); ++i) {
      if (window_labels[w][i] < 0 || window_labels[w][i] >= cls.spec.num_classes) {
        throw DataError("train_classifier: label " + std::to_string(window_labels[w][i]) +
                        " outside [0, " + std::to_string(cls.spec.num_classes) + ") at row " +
                        std::to_string(i));
      }
    }
    total += static_cast<size_t>(f.dim(0));
  }
  if (total == 0) throw DataError("train_classifier: empty training data");
  std::vector<const TensorF*> window_ptrs;
  std::vector<const std::vector<int>*> label_ptrs;
  for (size_t w = 0; w < windows.size(); ++w) {
    if (windows[w].dim(0) > 0) {
      window_ptrs.push_back(&windows[w]);
      label_ptrs.push_back(&window_labels[w]);
    }
  }
  AdamState state = adam_for(cls.params);
  for (int e = 0; e < epochs; ++e) {
    const std::vector<SeqBatch> plan = plan_epoch(window_ptrs, policy, rng);
    train_batches(cls.params, plan, lr, state, status,
                  [&](TapeF& tape, const std::vector<int>& ids, const SeqBatch& b) {
                    return cls_batch_loss(tape, cls, ids, window_ptrs, label_ptrs, b);
                  });
  }
  return cls;
}

}  // namespace fsfl
