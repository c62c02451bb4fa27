#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fsfl/bench.hpp"

using namespace fsfl;

namespace {

TimeSeriesDataset noise_dataset(int rows, int nf, uint64_t seed) {
  TimeSeriesDataset ds;
  ds.num_features = nf;
  ds.num_classes = 3;
  Rng rng = Rng::seeded(seed);
  for (int r = 0; r < rows; ++r) {
    for (int j = 0; j < nf; ++j) ds.features.push_back(static_cast<float>(rng.uniform(-1, 1)));
    ds.labels.push_back(rng.uniform_int(0, 2));
  }
  return ds;
}

}  // namespace

TEST_CASE("mac_count: formula spot checks") {
  // Dense 26 -> 12 over 33 steps.
  CHECK(mac_count_classifier({HeadKind::SOFTMAX, 26, 12, 0}, 33) == 10296);
  // LSTM cell in=52, hidden=26 over 33 steps: 33 * 4 * 26 * 78.
  CHECK(mac_count_encoder({AeVariant::LSTM, 52, 26}, 33) == 267696);
  // Empty pipeline.
  CHECK(mac_count(PipelineModel{}, 33) == 0);
}

TEST_CASE("mac_count: additive over pipeline stages, linear in window length") {
  const AutoencoderSpec enc{AeVariant::LSTM, 9, 5};
  const ClassifierSpec head{HeadKind::SOFTMAX, 5, 3, 0};
  Autoencoder ae;
  ae.spec = enc;
  Classifier cls;
  cls.spec = head;
  const PipelineModel pipe{&ae, &cls};
  CHECK(mac_count(pipe, 33) == mac_count_encoder(enc, 33) + mac_count_classifier(head, 33));
  CHECK(mac_count(pipe, 330) == 10 * mac_count(pipe, 33));
  CHECK(mac_count_encoder({AeVariant::FC, 9, 5}, 7) == 7u * 5 * 9);
  CHECK(mac_count_encoder({AeVariant::CNN, 9, 5}, 1) == 8 * 3 * 9 + 2 * 8 * 9 + 5 * 8 * 9);
}

TEST_CASE("mac_count: semi pipeline beats the supervised classifier on all dataset shapes") {
  struct ShapeCase {
    int nf, classes;
  };
  for (const ShapeCase& s : {ShapeCase{79, 18}, ShapeCase{9, 3}, ShapeCase{52, 12}}) {
    const int d = repr_dim(s.nf, 0.5);
    const uint64_t semi = mac_count_encoder({AeVariant::LSTM, s.nf, d}, 33) +
                          mac_count_classifier({HeadKind::SOFTMAX, d, s.classes, 0}, 33);
    const uint64_t sup = mac_count_classifier({HeadKind::LSTM, s.nf, s.classes, 0}, 33);
    CAPTURE(s.nf);
    CHECK(semi < sup);
  }
}

TEST_CASE("time_pipeline: window bookkeeping and argument checks") {
  const TimeSeriesDataset test = noise_dataset(533, 9, 1);
  const Autoencoder ae = build_autoencoder({AeVariant::LSTM, 9, 5}, 1);
  const Classifier cls = build_classifier({HeadKind::SOFTMAX, 5, 3, 0}, 1);
  const PipelineModel pipe{&ae, &cls};

  const LatencyReport rep = time_pipeline(pipe, test, 33, 2, "SEMI");
  CHECK(rep.window_micros.size() == 533 / 33);
  CHECK(rep.scheme == "SEMI");
  CHECK(rep.mac_per_window == mac_count(pipe, 33));
  CHECK(rep.param_count == ae.params.param_count() + cls.params.param_count());
  CHECK(rep.serialized_bytes == 4 * rep.param_count);
  CHECK(rep.mean > 0.0);
  CHECK(rep.median > 0.0);
  CHECK(rep.p95 >= rep.median);
  // Min over repetitions never exceeds the mean over repetitions.
  for (size_t w = 0; w < rep.window_micros.size(); ++w) {
    CHECK(rep.window_micros[w] <= rep.window_micros_mean[w] + 1e-9);
  }

  CHECK_THROWS_WITH_AS(time_pipeline(pipe, test, 33, 0, "SEMI"),
                       doctest::Contains("repetition"), ConfigError);
  CHECK_THROWS_AS(time_pipeline(PipelineModel{}, test, 33, 1, "X"), ConfigError);
  CHECK_THROWS_AS(time_pipeline(pipe, noise_dataset(20, 9, 2), 33, 1, "SEMI"), DataError);
}

TEST_CASE("mann_whitney: identical samples show no difference") {
  const std::vector<double> a(40, 3.25);
  const MannWhitneyResult r = mann_whitney(a, a);
  CHECK(r.p_value == doctest::Approx(1.0));
  CHECK(r.direction == 0);
}

TEST_CASE("mann_whitney: disjoint samples are significant at n = 30") {
  std::vector<double> a, b;
  for (int i = 0; i < 30; ++i) {
    a.push_back(1.0 + 0.01 * i);
    b.push_back(2.0 + 0.01 * i);
  }
  const MannWhitneyResult r = mann_whitney(a, b);
  CHECK(r.p_value < 0.001);
  CHECK(r.direction == -1);
  const MannWhitneyResult flipped = mann_whitney(b, a);
  CHECK(flipped.direction == 1);
  CHECK(flipped.p_value < 0.001);
}

TEST_CASE("mann_whitney: overlapping samples are not significant") {
  Rng rng = Rng::seeded(8);
  std::vector<double> a, b;
  for (int i = 0; i < 50; ++i) {
    a.push_back(rng.uniform(0, 1));
    b.push_back(rng.uniform(0, 1));
  }
  CHECK(mann_whitney(a, b).p_value > 0.01);
}

TEST_CASE("compare_latency requires 30 windows per side") {
  LatencyReport a, b;
  a.window_micros.assign(29, 1.0);
  b.window_micros.assign(40, 2.0);
  CHECK_THROWS_AS(compare_latency(a, b), DataError);
  a.window_micros.assign(30, 1.0);
  CHECK(compare_latency(a, b).direction == -1);
}
