#include "fsfl/federation.hpp"

#include <algorithm>
#include <cmath>

#include "fsfl/parallel.hpp"

namespace fsfl {

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::SEMI: return "SEMI";
    case Scheme::SUPERVISED: return "SUPERVISED";
    case Scheme::CS: return "CS";
    case Scheme::DA: return "DA";
  }
  return "?";
}

const char* to_string(PartitionKind p) { return p == PartitionKind::IID ? "IID" : "NONIID"; }

void FederationConfig::validate() const {
  if (num_clients < 1) throw ConfigError("K: need at least 1 client");
  if (!(client_fraction > 0.0 && client_fraction <= 1.0)) {
    throw ConfigError("C: client fraction must be in (0,1], got " +
                      std::to_string(client_fraction));
  }
  if (static_cast<int>(std::floor(num_clients * client_fraction + 0.5)) < 1) {
    throw ConfigError("C: K*C must select at least one client");
  }
  if (rounds < 0) throw ConfigError("T: rounds must be >= 0");
  if (!(lr_autoencoder > 0.0f)) throw ConfigError("lr_a: learning rate must be > 0");
  if (!(lr_classifier > 0.0f)) throw ConfigError("lr_s: learning rate must be > 0");
  if (epochs_autoencoder < 0) throw ConfigError("e_a: epochs must be >= 0");
  if (epochs_classifier < 0) throw ConfigError("e_s: epochs must be >= 0");
  if (!(label_ratio > 0.0 && label_ratio <= 1.0)) {
    throw ConfigError("r_l: label ratio must be in (0,1], got " + std::to_string(label_ratio));
  }
  if (!(compression_ratio > 0.0 && compression_ratio < 1.0)) {
    throw ConfigError("r_f: compression ratio must be in (0,1), got " +
                      std::to_string(compression_ratio));
  }
  if (eval_every < 1) throw ConfigError("eval_every: must be >= 1");
  if (eval_window < 1) throw ConfigError("window: must be >= 1");
  bagging.validate();
}

std::vector<int> select_clients(int num_clients, double fraction, int round, uint64_t seed) {
  const int m = std::clamp(static_cast<int>(std::floor(num_clients * fraction + 0.5)), 1,
                           num_clients);
  std::vector<int> order(static_cast<size_t>(num_clients));
  for (int i = 0; i < num_clients; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = tagged_rng(seed, RngTag::ClientSelect, static_cast<uint64_t>(round));
  for (int i = 0; i < m; ++i) {
    const int j = rng.uniform_int(i, num_clients - 1);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  std::vector<int> selected(order.begin(), order.begin() + m);
  std::sort(selected.begin(), selected.end());
  return selected;
}

std::vector<TensorD> fedavg_accumulate(const std::vector<ClientUpdate>& updates) {
  if (updates.empty()) throw DataError("fedavg: no client updates");
  std::vector<const ClientUpdate*> sorted;
  sorted.reserve(updates.size());
  for (const auto& u : updates) sorted.push_back(&u);
  std::sort(sorted.begin(), sorted.end(),
            [](const ClientUpdate* a, const ClientUpdate* b) { return a->client_id < b->client_id; });

  const ModelParams& ref = sorted.front()->params;
  double total = 0.0;
  for (const ClientUpdate* u : sorted) {
    if (u->n_k == 0) throw DataError("fedavg: client " + std::to_string(u->client_id) + " has n_k = 0");
    if (u->params.tensors.size() != ref.tensors.size()) {
      throw ShapeError("fedavg: client " + std::to_string(u->client_id) + " has " +
                       std::to_string(u->params.tensors.size()) + " tensors, expected " +
                       std::to_string(ref.tensors.size()));
    }
    for (size_t t = 0; t < ref.tensors.size(); ++t) {
      const auto& a = u->params.tensors[t];
      const auto& b = ref.tensors[t];
      if (a.name != b.name || a.value.shape != b.value.shape) {
        throw ShapeError("fedavg: client " + std::to_string(u->client_id) + " tensor '" +
                         a.name + "' " + a.value.shape_str() + " vs '" + b.name + "' " +
                         b.value.shape_str());
      }
    }
    total += static_cast<double>(u->n_k);
  }

  std::vector<TensorD> acc;
  acc.reserve(ref.tensors.size());
  for (const auto& t : ref.tensors) acc.emplace_back(t.value.shape);
  for (const ClientUpdate* u : sorted) {
    const double w = static_cast<double>(u->n_k) / total;
    for (size_t t = 0; t < ref.tensors.size(); ++t) {
      const auto& src = u->params.tensors[t].value.data;
      auto& dst = acc[t].data;
      for (size_t i = 0; i < dst.size(); ++i) dst[i] += w * static_cast<double>(src[i]);
    }
  }
  return acc;
}

ModelParams fedavg(const std::vector<ClientUpdate>& updates) {
  const std::vector<TensorD> acc = fedavg_accumulate(updates);
  const ModelParams& ref = updates.front().params;
  ModelParams out;
  out.tensors.reserve(ref.tensors.size());
  for (size_t t = 0; t < ref.tensors.size(); ++t) {
    TensorF avg(ref.tensors[t].value.shape);
    for (size_t i = 0; i < avg.data.size(); ++i) {
      avg.data[i] = static_cast<float>(acc[t].data[i]);
    }
    out.add(ref.tensors[t].name, std::move(avg));
  }
  return out;
}

std::vector<int> pseudo_label_window(const Classifier& cls, const TensorF& window,
                                     const BaggingPolicy& policy, Rng& rng) {
  const int rows = window.dim(0);
  std::vector<int> labels;
  labels.reserve(static_cast<size_t>(rows));
  int cursor = 0;
  while (cursor < rows) {
    const int s = std::min(rng.uniform_int(policy.seq_min, policy.seq_max), rows - cursor);
    const TensorF chunk({s, window.dim(1)},
                        std::vector<float>(window.data.begin() + static_cast<size_t>(cursor) * window.dim(1),
                                           window.data.begin() + static_cast<size_t>(cursor + s) * window.dim(1)));
    const std::vector<int> preds = classify(cls, chunk);
    labels.insert(labels.end(), preds.begin(), preds.end());
    cursor += s;
  }
  return labels;
}

namespace {

// Fans the per-client work out over the worker pool. Each slot holds either
// an update or an error message; failed clients are dropped from aggregation
// and logged. Aggregation order is by client id, so serial and pooled
// execution agree bit for bit.
template <typename TrainFn>
std::vector<ClientUpdate> run_clients(const std::vector<int>& selected, TrainFn&& train_one,
                                      RoundLog* log) {
  const int n = static_cast<int>(selected.size());
  std::vector<ClientUpdate> slots(static_cast<size_t>(n));
  std::vector<std::string> errors(static_cast<size_t>(n));
  par::parallel_for(n, [&](int i) {
    const int id = selected[static_cast<size_t>(i)];
    try {
      slots[static_cast<size_t>(i)] = train_one(id);
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(i)] = e.what();
      slots[static_cast<size_t>(i)].n_k = 0;
    }
  });
  std::vector<ClientUpdate> updates;
  updates.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (!errors[static_cast<size_t>(i)].empty()) {
      if (log) {
        log->messages.push_back("client " + std::to_string(selected[static_cast<size_t>(i)]) +
                                " dropped: " + errors[static_cast<size_t>(i)]);
      }
      continue;
    }
    updates.push_back(std::move(slots[static_cast<size_t>(i)]));
  }
  return updates;
}

const ClientPartition& partition_of(const std::vector<ClientPartition>& partitions, int id) {
  if (id < 0 || static_cast<size_t>(id) >= partitions.size()) {
    throw ConfigError("federation: client id " + std::to_string(id) + " has no partition");
  }
  return partitions[static_cast<size_t>(id)];
}

}  // namespace

GlobalState run_round_semi(GlobalState state, const FederationConfig& cfg,
                           const std::vector<ClientPartition>& partitions,
                           const TimeSeriesDataset& labeled, RoundLog* log) {
  const int round = state.round + 1;
  const std::vector<int> selected =
      select_clients(cfg.num_clients, cfg.client_fraction, round, cfg.seed);

  const std::vector<ClientUpdate> updates = run_clients(
      selected,
      [&](int id) {
        const ClientPartition& part = partition_of(partitions, id);
        Autoencoder local = ae_train_locally(
            state.autoencoder, part.windows, cfg.lr_autoencoder, cfg.epochs_autoencoder,
            cfg.bagging,
            tagged_rng(cfg.seed, RngTag::ClientTrain, static_cast<uint64_t>(round),
                       static_cast<uint64_t>(id)));
        return ClientUpdate{id, std::move(local.params), part.n_k};
      },
      log);

  if (!updates.empty()) {
    state.autoencoder.params = fedavg(updates);
  } else if (log) {
    log->messages.push_back("round " + std::to_string(round) +
                            ": all clients failed, keeping previous autoencoder");
  }

  // Server side: encode the labelled set with the new encoder, then train the
  // persistent classifier on the labelled representations.
  const TensorF reps =
      encode(state.autoencoder, labeled.feature_block(0, labeled.rows()));
  state.classifier = train_classifier(
      std::move(state.classifier), reps, labeled.labels, cfg.lr_classifier,
      cfg.epochs_classifier, cfg.bagging,
      tagged_rng(cfg.seed, RngTag::ServerTrain, static_cast<uint64_t>(round)));
  state.round = round;
  return state;
}

GlobalState run_round_supervised(GlobalState state, const FederationConfig& cfg,
                                 const std::vector<LabeledClientPartition>& partitions,
                                 RoundLog* log) {
  const int round = state.round + 1;
  const std::vector<int> selected =
      select_clients(cfg.num_clients, cfg.client_fraction, round, cfg.seed);

  const std::vector<ClientUpdate> updates = run_clients(
      selected,
      [&](int id) {
        if (id < 0 || static_cast<size_t>(id) >= partitions.size()) {
          throw ConfigError("federation: client id " + std::to_string(id) + " has no partition");
        }
        const LabeledClientPartition& part = partitions[static_cast<size_t>(id)];
        Classifier local = train_classifier_windows(
            state.classifier, part.windows, part.window_labels, cfg.lr_classifier,
            cfg.epochs_autoencoder, cfg.bagging,
            tagged_rng(cfg.seed, RngTag::ClientTrain, static_cast<uint64_t>(round),
                       static_cast<uint64_t>(id)));
        return ClientUpdate{id, std::move(local.params), part.n_k};
      },
      log);

  if (!updates.empty()) {
    state.classifier.params = fedavg(updates);
  } else if (log) {
    log->messages.push_back("round " + std::to_string(round) +
                            ": all clients failed, keeping previous classifier");
  }
  state.round = round;
  return state;
}

GlobalState run_round_cs(GlobalState state, const FederationConfig& cfg,
                         const TimeSeriesDataset& labeled, RoundLog* log) {
  (void)log;
  const int round = state.round + 1;
  state.classifier = train_classifier(
      std::move(state.classifier), labeled.feature_block(0, labeled.rows()), labeled.labels,
      cfg.lr_classifier, cfg.epochs_classifier, cfg.bagging,
      tagged_rng(cfg.seed, RngTag::ServerTrain, static_cast<uint64_t>(round)));
  state.round = round;
  return state;
}

GlobalState run_round_da(GlobalState state, const FederationConfig& cfg,
                         const std::vector<ClientPartition>& partitions,
                         const TimeSeriesDataset& labeled, RoundLog* log) {
  const int round = state.round + 1;
  const std::vector<int> selected =
      select_clients(cfg.num_clients, cfg.client_fraction, round, cfg.seed);

  const std::vector<ClientUpdate> updates = run_clients(
      selected,
      [&](int id) {
        const ClientPartition& part = partition_of(partitions, id);
        Rng rng = tagged_rng(cfg.seed, RngTag::PseudoLabel, static_cast<uint64_t>(round),
                             static_cast<uint64_t>(id));
        std::vector<std::vector<int>> pseudo;
        pseudo.reserve(part.windows.size());
        for (const TensorF& w : part.windows) {
          pseudo.push_back(pseudo_label_window(state.classifier, w, cfg.bagging, rng));
        }
        Classifier local = train_classifier_windows(
            state.classifier, part.windows, pseudo, cfg.lr_classifier,
            cfg.epochs_autoencoder, cfg.bagging,
            tagged_rng(cfg.seed, RngTag::ClientTrain, static_cast<uint64_t>(round),
                       static_cast<uint64_t>(id)));
        return ClientUpdate{id, std::move(local.params), part.n_k};
      },
      log);

  if (!updates.empty()) {
    state.classifier.params = fedavg(updates);
  } else if (log) {
    log->messages.push_back("round " + std::to_string(round) +
                            ": all clients failed, keeping previous classifier");
  }

  // Server fine-tune on the labelled set, mirroring the per-round server step
  // of the semi-supervised scheme.
  state.classifier = train_classifier(
      std::move(state.classifier), labeled.feature_block(0, labeled.rows()), labeled.labels,
      cfg.lr_classifier, cfg.epochs_classifier, cfg.bagging,
      tagged_rng(cfg.seed, RngTag::ServerTrain, static_cast<uint64_t>(round)));
  state.round = round;
  return state;
}

GlobalState init_global_state(const FederationConfig& cfg, int num_features, int num_classes) {
  GlobalState state;
  if (cfg.scheme == Scheme::SEMI) {
    const int d = repr_dim(num_features, cfg.compression_ratio);
    state.autoencoder = build_autoencoder({cfg.ae_variant, num_features, d}, cfg.seed);
    state.classifier = build_classifier({cfg.head, d, num_classes, 0}, cfg.seed);
  } else {
    state.classifier = build_classifier({HeadKind::LSTM, num_features, num_classes, 0}, cfg.seed);
  }
  return state;
}

std::vector<RoundMetrics> run_experiment(const FederationConfig& cfg,
                                         const TimeSeriesDataset& train,
                                         const TimeSeriesDataset& test, int replicate_id,
                                         RoundLog* log, GlobalState* final_state) {
  cfg.validate();
  if (train.num_features != test.num_features) {
    throw DataError("run_experiment: train has " + std::to_string(train.num_features) +
                    " features, test has " + std::to_string(test.num_features));
  }

  const TimeSeriesDataset labeled = sample_labeled_subset(train, cfg.label_ratio, cfg.seed);
  std::vector<ClientPartition> parts;
  std::vector<LabeledClientPartition> labeled_parts;
  if (cfg.scheme == Scheme::SEMI || cfg.scheme == Scheme::DA) {
    parts = cfg.partition == PartitionKind::IID
                ? partition_iid(train, cfg.num_clients, train.participants, cfg.seed)
                : partition_noniid(train, cfg.num_clients, train.participants, cfg.seed);
  } else if (cfg.scheme == Scheme::SUPERVISED) {
    labeled_parts =
        cfg.partition == PartitionKind::IID
            ? partition_iid_labeled(train, cfg.num_clients, train.participants, cfg.seed)
            : partition_noniid_labeled(train, cfg.num_clients, train.participants, cfg.seed);
  }

  GlobalState state = init_global_state(cfg, train.num_features, train.num_classes);

  std::vector<RoundMetrics> metrics;
  const auto evaluate = [&](int round) {
    RoundMetrics m;
    m.replicate_id = replicate_id;
    m.scheme = to_string(cfg.scheme);
    m.round = round;
    const Autoencoder* enc = cfg.scheme == Scheme::SEMI ? &state.autoencoder : nullptr;
    m.accuracy = windowed_accuracy(enc, state.classifier, test, cfg.eval_window);
    m.windows_evaluated = static_cast<int>(test.rows() / static_cast<size_t>(cfg.eval_window));
    metrics.push_back(std::move(m));
  };

  evaluate(0);

  // DA bootstraps its global classifier with one server-side supervised
  // warm-up before the first communication round.
  if (cfg.scheme == Scheme::DA) {
    state.classifier = train_classifier(
        std::move(state.classifier), labeled.feature_block(0, labeled.rows()), labeled.labels,
        cfg.lr_classifier, cfg.epochs_classifier, cfg.bagging,
        tagged_rng(cfg.seed, RngTag::ServerTrain, 0));
  }

  for (int t = 1; t <= cfg.rounds; ++t) {
    switch (cfg.scheme) {
      case Scheme::SEMI:
        state = run_round_semi(std::move(state), cfg, parts, labeled, log);
        break;
      case Scheme::SUPERVISED:
        state = run_round_supervised(std::move(state), cfg, labeled_parts, log);
        break;
      case Scheme::CS:
        state = run_round_cs(std::move(state), cfg, labeled, log);
        break;
      case Scheme::DA:
        state = run_round_da(std::move(state), cfg, parts, labeled, log);
        break;
    }
    if (t % cfg.eval_every == 0) evaluate(t);
  }
  if (final_state) *final_state = std::move(state);
  return metrics;
}

}  // namespace fsfl
