#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fsfl/federation.hpp"
#include "fsfl/parallel.hpp"

using namespace fsfl;

namespace {

bool same_params(const ModelParams& a, const ModelParams& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].name != b.tensors[i].name) return false;
    if (!(a.tensors[i].value == b.tensors[i].value)) return false;
  }
  return true;
}

ClientUpdate scalar_update(int id, float value, size_t n_k) {
  ClientUpdate u;
  u.client_id = id;
  u.n_k = n_k;
  u.params.add("w", TensorF({1}, {value}));
  return u;
}

// Small synthetic setup shared by the round tests.
struct Fixture {
  SynthConfig synth;
  TimeSeriesDataset train, test;
  FederationConfig cfg;
  std::vector<ClientPartition> parts;
  TimeSeriesDataset labeled;

  explicit Fixture(uint64_t seed = 3, int train_len = 8000) {
    synth.train_len = train_len;
    synth.test_len = 1000;
    synth.seed = seed;
    std::tie(train, test) = synth_generate(synth);
    cfg.num_clients = 4;
    cfg.client_fraction = 0.5;
    cfg.rounds = 1;
    cfg.label_ratio = 0.25;
    cfg.eval_window = 500;
    cfg.seed = seed;
    parts = partition_iid(train, cfg.num_clients, train.participants, cfg.seed);
    labeled = sample_labeled_subset(train, cfg.label_ratio, cfg.seed);
  }
};

}  // namespace

TEST_CASE("select_clients: sizes and determinism") {
  const std::vector<int> ten = select_clients(100, 0.1, 1, 7);
  CHECK(ten.size() == 10);
  CHECK(std::is_sorted(ten.begin(), ten.end()));
  CHECK(std::set<int>(ten.begin(), ten.end()).size() == 10);
  for (int id : ten) {
    CHECK(id >= 0);
    CHECK(id < 100);
  }

  const std::vector<int> all = select_clients(100, 1.0, 1, 7);
  CHECK(all.size() == 100);

  CHECK(select_clients(100, 0.1, 3, 7) == select_clients(100, 0.1, 3, 7));
  CHECK(select_clients(100, 0.1, 3, 7) != select_clients(100, 0.1, 4, 7));
  CHECK(select_clients(10, 0.01, 1, 7).size() == 1);  // at least one client
}

TEST_CASE("fedavg: weighted mean of scalars") {
  const std::vector<ClientUpdate> updates = {scalar_update(0, 0.0f, 1),
                                             scalar_update(1, 4.0f, 3)};
  const ModelParams avg = fedavg(updates);
  CHECK(avg.at("w").data[0] == doctest::Approx(3.0).epsilon(1e-7));
}

TEST_CASE("fedavg: identical updates are a fixed point") {
  std::vector<ClientUpdate> updates;
  for (int k = 0; k < 3; ++k) updates.push_back(scalar_update(k, 0.7531f, 5));
  const ModelParams avg = fedavg(updates);
  CHECK(avg.at("w").data[0] == 0.7531f);
}

TEST_CASE("fedavg: equal-weight mean matches an independent oracle at 1e-12") {
  Rng rng = Rng::seeded(31);
  std::vector<ClientUpdate> updates;
  const int models = 3;
  for (int k = 0; k < models; ++k) {
    ClientUpdate u;
    u.client_id = k;
    u.n_k = 10;
    TensorF t({4, 3});
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-2, 2));
    u.params.add("w", std::move(t));
    updates.push_back(std::move(u));
  }
  const std::vector<TensorD> acc = fedavg_accumulate(updates);
  for (size_t i = 0; i < acc[0].data.size(); ++i) {
    double mean = 0.0;
    for (const auto& u : updates) mean += static_cast<double>(u.params.tensors[0].value.data[i]);
    mean /= models;
    CHECK(std::fabs(acc[0].data[i] - mean) < 1e-12);
  }
}

TEST_CASE("fedavg: permutation invariant, exactly") {
  Rng rng = Rng::seeded(33);
  std::vector<ClientUpdate> updates;
  for (int k = 0; k < 5; ++k) {
    ClientUpdate u;
    u.client_id = k;
    u.n_k = static_cast<size_t>(rng.uniform_int(1, 50));
    TensorF t({7});
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1, 1));
    u.params.add("w", std::move(t));
    updates.push_back(std::move(u));
  }
  const ModelParams a = fedavg(updates);
  std::reverse(updates.begin(), updates.end());
  std::swap(updates[1], updates[3]);
  const ModelParams b = fedavg(updates);
  CHECK(same_params(a, b));
}

TEST_CASE("fedavg: shape mismatch names the client") {
  std::vector<ClientUpdate> updates = {scalar_update(0, 1.0f, 1)};
  ClientUpdate bad;
  bad.client_id = 1;
  bad.n_k = 1;
  bad.params.add("w", TensorF({2}));
  updates.push_back(std::move(bad));
  CHECK_THROWS_WITH_AS(fedavg(updates), doctest::Contains("client 1"), ShapeError);
  CHECK_THROWS_AS(fedavg({}), DataError);
}

TEST_CASE("run_round_semi: zero learning rate leaves the autoencoder untouched") {
  Fixture fx;
  fx.cfg.lr_autoencoder = 0.0f;  // round functions do not re-validate
  const GlobalState init = init_global_state(fx.cfg, fx.train.num_features, fx.train.num_classes);
  const GlobalState next = run_round_semi(init, fx.cfg, fx.parts, fx.labeled);
  CHECK(same_params(next.autoencoder.params, init.autoencoder.params));
  CHECK(next.round == 1);
  // The server-side classifier still trains.
  CHECK_FALSE(same_params(next.classifier.params, init.classifier.params));
}

TEST_CASE("run_round_semi: encoding the labelled set preserves its length") {
  Fixture fx;
  const GlobalState init = init_global_state(fx.cfg, fx.train.num_features, fx.train.num_classes);
  const TensorF reps = encode(init.autoencoder, fx.labeled.feature_block(0, fx.labeled.rows()));
  CHECK(reps.dim(0) == static_cast<int>(fx.labeled.rows()));
  CHECK(reps.dim(1) == init.autoencoder.spec.repr_dim);
}

TEST_CASE("run_round_semi: smoke round updates both models deterministically") {
  Fixture fx;
  const GlobalState init = init_global_state(fx.cfg, fx.train.num_features, fx.train.num_classes);
  const GlobalState a = run_round_semi(init, fx.cfg, fx.parts, fx.labeled);
  const GlobalState b = run_round_semi(init, fx.cfg, fx.parts, fx.labeled);
  CHECK_FALSE(same_params(a.autoencoder.params, init.autoencoder.params));
  CHECK_FALSE(same_params(a.classifier.params, init.classifier.params));
  CHECK(same_params(a.autoencoder.params, b.autoencoder.params));
  CHECK(same_params(a.classifier.params, b.classifier.params));
  for (const auto& t : a.autoencoder.params.tensors) CHECK(t.value.all_finite());

  // Global model shapes are invariant across rounds.
  const GlobalState c = run_round_semi(a, fx.cfg, fx.parts, fx.labeled);
  REQUIRE(c.autoencoder.params.tensors.size() == init.autoencoder.params.tensors.size());
  for (size_t t = 0; t < c.autoencoder.params.tensors.size(); ++t) {
    CHECK(c.autoencoder.params.tensors[t].name == init.autoencoder.params.tensors[t].name);
    CHECK(c.autoencoder.params.tensors[t].value.shape ==
          init.autoencoder.params.tensors[t].value.shape);
  }
  for (size_t t = 0; t < c.classifier.params.tensors.size(); ++t) {
    CHECK(c.classifier.params.tensors[t].value.shape ==
          init.classifier.params.tensors[t].value.shape);
  }
}

TEST_CASE("run_round_semi: serial and pooled client execution agree bitwise") {
  Fixture fx;
  const GlobalState init = init_global_state(fx.cfg, fx.train.num_features, fx.train.num_classes);
  par::worker_override() = 1;
  const GlobalState serial = run_round_semi(init, fx.cfg, fx.parts, fx.labeled);
  par::worker_override() = 4;
  const GlobalState pooled = run_round_semi(init, fx.cfg, fx.parts, fx.labeled);
  par::worker_override() = 0;
  CHECK(same_params(serial.autoencoder.params, pooled.autoencoder.params));
  CHECK(same_params(serial.classifier.params, pooled.classifier.params));
}

TEST_CASE("run_round_semi: a failing client is dropped and logged") {
  Fixture fx;
  GlobalState init = init_global_state(fx.cfg, fx.train.num_features, fx.train.num_classes);
  // Remove one selected client's partition data so its training fails.
  const std::vector<int> selected =
      select_clients(fx.cfg.num_clients, fx.cfg.client_fraction, 1, fx.cfg.seed);
  std::vector<ClientPartition> broken = fx.parts;
  broken[static_cast<size_t>(selected[0])].windows.clear();
  broken[static_cast<size_t>(selected[0])].windows.push_back(TensorF({3, 2}));  // wrong width

  RoundLog log;
  const GlobalState next = run_round_semi(init, fx.cfg, broken, fx.labeled, &log);
  CHECK(next.round == 1);
  REQUIRE(log.messages.size() == 1);
  CHECK(log.messages[0].find("client " + std::to_string(selected[0])) != std::string::npos);
}

TEST_CASE("run_round_supervised: aggregation equals the weighted mean") {
  Fixture fx;
  fx.cfg.scheme = Scheme::SUPERVISED;
  const auto labeled_parts =
      partition_iid_labeled(fx.train, fx.cfg.num_clients, fx.train.participants, fx.cfg.seed);
  const GlobalState init = init_global_state(fx.cfg, fx.train.num_features, fx.train.num_classes);

  SUBCASE("zero lr round is the identity") {
    FederationConfig cfg = fx.cfg;
    cfg.lr_classifier = 0.0f;
    const GlobalState next = run_round_supervised(init, cfg, labeled_parts);
    CHECK(same_params(next.classifier.params, init.classifier.params));
  }
  SUBCASE("accuracy improves over five rounds on synthetic data") {
    GlobalState state = init;
    const double acc0 = windowed_accuracy(nullptr, state.classifier, fx.test, 500);
    for (int t = 0; t < 5; ++t) {
      state = run_round_supervised(std::move(state), fx.cfg, labeled_parts);
    }
    const double acc5 = windowed_accuracy(nullptr, state.classifier, fx.test, 500);
    CHECK(acc5 > acc0);
  }
}

TEST_CASE("run_round_cs: server-only training") {
  Fixture fx;
  fx.cfg.scheme = Scheme::CS;
  const GlobalState init = init_global_state(fx.cfg, fx.train.num_features, fx.train.num_classes);

  SUBCASE("zero epochs is the identity") {
    FederationConfig cfg = fx.cfg;
    cfg.epochs_classifier = 0;
    const GlobalState next = run_round_cs(init, cfg, fx.labeled);
    CHECK(same_params(next.classifier.params, init.classifier.params));
  }
  SUBCASE("parameters move when lr_s > 0") {
    const GlobalState next = run_round_cs(init, fx.cfg, fx.labeled);
    CHECK_FALSE(same_params(next.classifier.params, init.classifier.params));
  }
  SUBCASE("converges on easy noise-free data within 50 rounds") {
    SynthConfig easy;
    easy.train_len = 3000;
    easy.test_len = 1000;
    easy.noise = 0.05;
    easy.seed = 9;
    const auto [train, test] = synth_generate(easy);
    FederationConfig cfg = fx.cfg;
    cfg.seed = 9;
    const TimeSeriesDataset labeled = sample_labeled_subset(train, 0.5, cfg.seed);
    GlobalState state = init_global_state(cfg, train.num_features, train.num_classes);
    double best = 0.0;
    for (int t = 0; t < 50 && best < 0.9; ++t) {
      state = run_round_cs(std::move(state), cfg, labeled);
      best = std::max(best, windowed_accuracy(nullptr, state.classifier, test, 500));
    }
    CHECK(best >= 0.9);
  }
}

TEST_CASE("pseudo labels: one per sample, exact under a perfect classifier") {
  SynthConfig cfg;
  cfg.noise = 0.0;
  cfg.train_len = 4000;
  cfg.test_len = 100;
  cfg.seed = 11;
  const auto [train, test] = synth_generate(cfg);

  // Nearest-template matching as a softmax head: W = 2*mu_k, b = -|mu_k|^2
  // makes argmax(Wx+b) the nearest-template class exactly.
  Classifier oracle;
  oracle.spec = {HeadKind::SOFTMAX, cfg.num_features, cfg.num_classes, 0};
  TensorF W({cfg.num_classes, cfg.num_features}), b({cfg.num_classes});
  for (int k = 0; k < cfg.num_classes; ++k) {
    const std::vector<float> mu = synth_class_template(cfg, k);
    double norm = 0.0;
    for (int j = 0; j < cfg.num_features; ++j) {
      W(k, j) = 2.0f * mu[static_cast<size_t>(j)];
      norm += static_cast<double>(mu[static_cast<size_t>(j)]) * mu[static_cast<size_t>(j)];
    }
    b(k) = static_cast<float>(-norm);
  }
  oracle.params.add("head.dense.W", std::move(W));
  oracle.params.add("head.dense.b", std::move(b));

  const auto parts = partition_noniid(train, 2, 4, cfg.seed);
  const auto labeled_parts = partition_noniid_labeled(train, 2, 4, cfg.seed);
  Rng rng = Rng::seeded(5);
  for (size_t k = 0; k < parts.size(); ++k) {
    size_t total = 0;
    for (size_t w = 0; w < parts[k].windows.size(); ++w) {
      const std::vector<int> pseudo =
          pseudo_label_window(oracle, parts[k].windows[w], {}, rng);
      REQUIRE(pseudo.size() == static_cast<size_t>(parts[k].windows[w].dim(0)));
      CHECK(pseudo == labeled_parts[k].window_labels[w]);
      total += pseudo.size();
    }
    CHECK(total == parts[k].n_k);
  }
}

TEST_CASE("run_round_da: zero learning rates leave the state unchanged") {
  Fixture fx;
  fx.cfg.scheme = Scheme::DA;
  fx.cfg.lr_classifier = 0.0f;
  const GlobalState init = init_global_state(fx.cfg, fx.train.num_features, fx.train.num_classes);
  const GlobalState next = run_round_da(init, fx.cfg, fx.parts, fx.labeled);
  CHECK(same_params(next.classifier.params, init.classifier.params));
  CHECK(next.round == 1);
}

TEST_CASE("run_experiment: evaluation cadence and determinism") {
  Fixture fx(13, 4000);
  fx.cfg.rounds = 5;
  fx.cfg.scheme = Scheme::CS;  // cheapest full path

  const std::vector<RoundMetrics> rows = run_experiment(fx.cfg, fx.train, fx.test, 0);
  REQUIRE(rows.size() == 3);  // t = 0, 2, 4
  CHECK(rows[0].round == 0);
  CHECK(rows[1].round == 2);
  CHECK(rows[2].round == 4);
  for (const RoundMetrics& m : rows) {
    CHECK(m.scheme == "CS");
    CHECK(m.windows_evaluated == 2);
    CHECK(m.accuracy >= 0.0);
    CHECK(m.accuracy <= 1.0);
  }

  SUBCASE("T = 0 evaluates exactly once") {
    FederationConfig cfg = fx.cfg;
    cfg.rounds = 0;
    const auto only = run_experiment(cfg, fx.train, fx.test, 0);
    REQUIRE(only.size() == 1);
    CHECK(only[0].round == 0);
  }
  SUBCASE("identical config and seed give bit-identical metric streams") {
    const auto again = run_experiment(fx.cfg, fx.train, fx.test, 0);
    REQUIRE(again.size() == rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
      CHECK(again[i].accuracy == rows[i].accuracy);
      CHECK(again[i].round == rows[i].round);
    }
  }
  SUBCASE("config validation happens before any compute") {
    FederationConfig cfg = fx.cfg;
    cfg.client_fraction = 0.0;
    CHECK_THROWS_AS(run_experiment(cfg, fx.train, fx.test, 0), ConfigError);
  }
}

TEST_CASE("run_experiment: SEMI end to end, serial equals pooled") {
  Fixture fx(17, 4000);
  fx.cfg.rounds = 2;
  fx.cfg.eval_every = 2;

  par::worker_override() = 1;
  const auto serial = run_experiment(fx.cfg, fx.train, fx.test, 0);
  par::worker_override() = 4;
  const auto pooled = run_experiment(fx.cfg, fx.train, fx.test, 0);
  par::worker_override() = 0;
  REQUIRE(serial.size() == pooled.size());
  for (size_t i = 0; i < serial.size(); ++i) {
    CHECK(serial[i].accuracy == pooled[i].accuracy);
  }
}
