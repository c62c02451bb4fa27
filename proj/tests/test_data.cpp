#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "fsfl/data.hpp"

using namespace fsfl;

namespace {

struct TempCsv {
  std::string path;
  explicit TempCsv(const std::string& content) {
    static int counter = 0;
    path = "test_data_" + std::to_string(counter++) + ".csv";
    std::ofstream out(path, std::ios::binary);
    out << content;
  }
  ~TempCsv() { std::remove(path.c_str()); }
};

template <typename T>
concept CarriesLabels = requires(T t) { t.window_labels; };
static_assert(!CarriesLabels<ClientPartition>,
              "unlabelled partitions must not carry labels");
static_assert(CarriesLabels<LabeledClientPartition>);

}  // namespace

TEST_CASE("load_csv: small valid file") {
  TempCsv f("f0,f1,f2,label\n1,2,3,0\n4,5,6,1\n");
  const TimeSeriesDataset ds = load_csv(f.path);
  CHECK(ds.rows() == 2);
  CHECK(ds.num_features == 3);
  CHECK(ds.num_classes == 2);
  CHECK(ds.labels == std::vector<int>{0, 1});
  CHECK(ds.row(1)[2] == 6.0f);
}

TEST_CASE("load_csv: error cases carry line numbers") {
  {
    TempCsv f("f0,label\n");
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("no data rows"), DataError);
  }
  {
    TempCsv f("");
    CHECK_THROWS_AS(load_csv(f.path), DataError);
  }
  {
    TempCsv f("f0,label\n1,2.5\n");
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("non-integer label"), DataError);
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("line 2"), DataError);
  }
  {
    TempCsv f("f0,label\nx,0\n");
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("non-numeric"), DataError);
  }
  {
    TempCsv f("f0,label\n1,0,9\n");
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("ragged"), DataError);
  }
  {
    TempCsv f("a,label\n1,0\n");
    CHECK_THROWS_WITH_AS(load_csv(f.path), doctest::Contains("unknown header"), DataError);
  }
  CHECK_THROWS_AS(load_csv("does_not_exist.csv"), DataError);
}

TEST_CASE("synth_generate: deterministic under the seed") {
  SynthConfig cfg;
  cfg.train_len = 500;
  cfg.test_len = 200;
  const auto [tr1, te1] = synth_generate(cfg);
  const auto [tr2, te2] = synth_generate(cfg);
  CHECK(tr1.features == tr2.features);
  CHECK(tr1.labels == tr2.labels);
  CHECK(te1.features == te2.features);
  SynthConfig other = cfg;
  other.seed = 2;
  const auto [tr3, te3] = synth_generate(other);
  CHECK(tr1.features != tr3.features);
  CHECK(tr1.rows() == 500);
  CHECK(te1.rows() == 200);
  CHECK(tr1.num_features == cfg.num_features);
}

TEST_CASE("synth_generate: noise-free data matches the nearest template exactly") {
  SynthConfig cfg;
  cfg.noise = 0.0;
  cfg.train_len = 2000;
  cfg.test_len = 100;
  const auto [train, test] = synth_generate(cfg);
  std::vector<std::vector<float>> tpl;
  for (int k = 0; k < cfg.num_classes; ++k) tpl.push_back(synth_class_template(cfg, k));
  int correct = 0;
  for (size_t r = 0; r < train.rows(); ++r) {
    int best = 0;
    double best_d = 1e300;
    for (int k = 0; k < cfg.num_classes; ++k) {
      double d = 0.0;
      for (int j = 0; j < cfg.num_features; ++j) {
        const double diff = train.row(r)[j] - tpl[static_cast<size_t>(k)][static_cast<size_t>(j)];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    if (best == train.labels[r]) ++correct;
  }
  CHECK(correct == static_cast<int>(train.rows()));
}

TEST_CASE("synth_generate: the activity chain visits every class") {
  SynthConfig cfg;
  cfg.train_len = 20000;
  cfg.dwell = 100;
  const auto [train, test] = synth_generate(cfg);
  std::vector<int> counts(static_cast<size_t>(cfg.num_classes), 0);
  for (int y : train.labels) counts[static_cast<size_t>(y)]++;
  for (int c : counts) CHECK(c > 0);
  // Segment lengths should be near the configured dwell on average.
  int segments = 1;
  for (size_t r = 1; r < train.rows(); ++r) {
    if (train.labels[r] != train.labels[r - 1]) ++segments;
  }
  const double mean_dwell = static_cast<double>(train.rows()) / segments;
  CHECK(mean_dwell > 50.0);
  CHECK(mean_dwell < 200.0);
}

TEST_CASE("repr_dim: round half up with a floor of one") {
  CHECK(repr_dim(52, 0.5) == 26);
  CHECK(repr_dim(79, 0.25) == 20);  // 19.75 rounds up
  CHECK(repr_dim(9, 0.125) == 1);   // 1.125 rounds down to the floor
  CHECK(repr_dim(9, 0.5) == 5);     // 4.5 rounds half up
  CHECK_THROWS_AS(repr_dim(10, 0.0), ConfigError);
  CHECK_THROWS_AS(repr_dim(10, 1.0), ConfigError);
  CHECK_THROWS_AS(repr_dim(10, -0.5), ConfigError);
}

namespace {

TimeSeriesDataset ramp_dataset(int rows, int participants = 4) {
  TimeSeriesDataset ds;
  ds.num_features = 1;
  ds.num_classes = 2;
  ds.participants = participants;
  for (int r = 0; r < rows; ++r) {
    ds.features.push_back(static_cast<float>(r));
    ds.labels.push_back(r % 2);
  }
  return ds;
}

}  // namespace

TEST_CASE("sample_labeled_subset: division selection") {
  const TimeSeriesDataset train = ramp_dataset(1000);

  SUBCASE("half ratio selects 50 divisions") {
    const TimeSeriesDataset sub = sample_labeled_subset(train, 0.5, 1);
    CHECK(sub.rows() == 500);
  }
  SUBCASE("1/32 rounds to 3 divisions") {
    const TimeSeriesDataset sub = sample_labeled_subset(train, 1.0 / 32.0, 1);
    CHECK(sub.rows() == 30);
  }
  SUBCASE("full ratio returns the training set in original order") {
    const TimeSeriesDataset sub = sample_labeled_subset(train, 1.0, 1);
    CHECK(sub.features == train.features);
    CHECK(sub.labels == train.labels);
  }
  SUBCASE("selected rows stay in temporal order") {
    const TimeSeriesDataset sub = sample_labeled_subset(train, 0.25, 7);
    for (size_t r = 1; r < sub.rows(); ++r) CHECK(sub.features[r] > sub.features[r - 1]);
  }
  SUBCASE("tiny ratios keep at least one division") {
    const TimeSeriesDataset sub = sample_labeled_subset(train, 0.0001, 1);
    CHECK(sub.rows() == 10);
  }
  SUBCASE("remainder rows ride on the last division") {
    const TimeSeriesDataset odd = ramp_dataset(1034);
    const TimeSeriesDataset sub = sample_labeled_subset(odd, 1.0, 1);
    CHECK(sub.rows() == 1034);
  }
  CHECK_THROWS_AS(sample_labeled_subset(ramp_dataset(99), 0.5, 1), DataError);
  CHECK_THROWS_AS(sample_labeled_subset(train, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(sample_labeled_subset(train, 1.5, 1), ConfigError);
}

TEST_CASE("sample_labeled_subset: size bounds over random ratios") {
  const TimeSeriesDataset train = ramp_dataset(1037);  // remainder 37
  for (double ratio : {0.01, 0.1, 1.0 / 3.0, 0.77, 0.999}) {
    const TimeSeriesDataset sub = sample_labeled_subset(train, ratio, 3);
    const size_t base = 1037 / 100;
    const int count = std::max(1, static_cast<int>(std::floor(100.0 * ratio + 0.5)));
    CHECK(sub.rows() >= base * static_cast<size_t>(count));
    CHECK(sub.rows() <= base * static_cast<size_t>(count) + 37);
  }
}

TEST_CASE("partition_iid: 100 fragments per client, labels stripped") {
  const TimeSeriesDataset train = ramp_dataset(651, 4);
  // n_k = floor(651/4) = 162; fragment length 1.
  const auto parts = partition_iid(train, 3, 4, 1);
  REQUIRE(parts.size() == 3);
  for (const ClientPartition& p : parts) {
    CHECK(p.windows.size() == 100);
    CHECK(p.n_k == 100);  // 100 fragments of floor(162/100) = 1 sample
    for (const TensorF& w : p.windows) CHECK(w.dim(1) == 1);
  }
  // Same seed, different clients: stream separation gives different offsets.
  CHECK(parts[0].windows != parts[1].windows);

  // Opp-scale arithmetic: 651k rows over 4 participants.
  const TimeSeriesDataset big = ramp_dataset(651000, 4);
  const auto one = partition_iid(big, 1, 4, 1);
  CHECK(one[0].n_k == 162700);  // 100 fragments of floor(162750/100)
}

TEST_CASE("partition_iid rejects clients with fewer than 100 samples") {
  const TimeSeriesDataset train = ramp_dataset(300, 4);  // n_k = 75
  CHECK_THROWS_AS(partition_iid(train, 2, 4, 1), DataError);
}

TEST_CASE("partition_noniid: one contiguous window inside bounds") {
  const TimeSeriesDataset train = ramp_dataset(1000, 4);
  const auto parts = partition_noniid(train, 8, 4, 9);
  for (const ClientPartition& p : parts) {
    REQUIRE(p.windows.size() == 1);
    CHECK(p.n_k == 250);
    const TensorF& w = p.windows[0];
    CHECK(w.dim(0) == 250);
    const float start = w.data[0];
    CHECK(start >= 0.0f);
    CHECK(start <= 750.0f);
    // Contiguity: the ramp must increase by exactly 1 per row.
    for (int r = 1; r < w.dim(0); ++r) CHECK(w(r, 0) == w(r - 1, 0) + 1.0f);
  }

  // participants = 1 means every client sees the whole (unlabelled) series.
  const auto whole = partition_noniid(train, 2, 1, 9);
  CHECK(whole[0].n_k == 1000);
  CHECK(whole[1].n_k == 1000);
  CHECK(whole[0].windows[0] == whole[1].windows[0]);
}

TEST_CASE("non-IID clients cover fewer labels than IID clients on long-dwell data") {
  SynthConfig cfg;
  cfg.train_len = 20000;
  cfg.test_len = 100;
  cfg.dwell = 3000;  // much longer than n_k / 100
  cfg.seed = 5;
  const auto [train, test] = synth_generate(cfg);
  const int clients = 12;
  const auto iid = partition_iid_labeled(train, clients, 10, 2);     // n_k = 2000
  const auto noniid = partition_noniid_labeled(train, clients, 10, 2);
  auto coverage = [](const std::vector<LabeledClientPartition>& parts) {
    double total = 0.0;
    for (const auto& p : parts) {
      std::set<int> seen;
      for (const auto& labels : p.window_labels) seen.insert(labels.begin(), labels.end());
      total += static_cast<double>(seen.size());
    }
    return total / static_cast<double>(parts.size());
  };
  CHECK(coverage(noniid) < coverage(iid));
}

TEST_CASE("labelled partitions place windows exactly like unlabelled ones") {
  const TimeSeriesDataset train = ramp_dataset(2000, 4);
  const auto plain = partition_iid(train, 4, 4, 11);
  const auto labeled = partition_iid_labeled(train, 4, 4, 11);
  for (size_t k = 0; k < plain.size(); ++k) {
    REQUIRE(plain[k].windows.size() == labeled[k].windows.size());
    for (size_t w = 0; w < plain[k].windows.size(); ++w) {
      CHECK(plain[k].windows[w] == labeled[k].windows[w]);
    }
    // Labels match the ramp rows.
    for (size_t w = 0; w < labeled[k].windows.size(); ++w) {
      const TensorF& win = labeled[k].windows[w];
      for (int r = 0; r < win.dim(0); ++r) {
        CHECK(labeled[k].window_labels[w][static_cast<size_t>(r)] ==
              static_cast<int>(win(r, 0)) % 2);
      }
    }
  }
}

TEST_CASE("partitions are reproducible in (seed, client)") {
  const TimeSeriesDataset train = ramp_dataset(2000, 4);
  const auto a = partition_noniid(train, 4, 4, 21);
  const auto b = partition_noniid(train, 4, 4, 21);
  const auto c = partition_noniid(train, 4, 4, 22);
  bool same = true, any_diff = false;
  for (size_t k = 0; k < a.size(); ++k) {
    same = same && a[k].windows[0] == b[k].windows[0];
    any_diff = any_diff || !(a[k].windows[0] == c[k].windows[0]);
  }
  CHECK(same);
  CHECK(any_diff);
}
