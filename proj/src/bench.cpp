#include "fsfl/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "fsfl/errors.hpp"

namespace fsfl {

uint64_t mac_count_encoder(const AutoencoderSpec& spec, int window_len) {
  const uint64_t W = static_cast<uint64_t>(window_len);
  const uint64_t nf = static_cast<uint64_t>(spec.input_dim);
  const uint64_t d = static_cast<uint64_t>(spec.repr_dim);
  switch (spec.variant) {
    case AeVariant::FC:
      return W * d * nf;
    case AeVariant::CNN:
      // conv (8 ch, kernel 3) + batchnorm (2 per element) + flatten dense.
      return W * (8 * 3 * nf + 2 * 8 * nf + d * 8 * nf);
    case AeVariant::LSTM:
      return W * 4 * d * (nf + d);
  }
  return 0;
}

uint64_t mac_count_classifier(const ClassifierSpec& spec, int window_len) {
  const uint64_t W = static_cast<uint64_t>(window_len);
  const uint64_t in = static_cast<uint64_t>(spec.input_dim);
  const uint64_t k = static_cast<uint64_t>(spec.num_classes);
  if (spec.head == HeadKind::SOFTMAX) return W * k * in;
  const uint64_t h = static_cast<uint64_t>(spec.effective_hidden());
  return W * (4 * h * (in + h) + k * h);
}

uint64_t mac_count(const PipelineModel& model, int window_len) {
  uint64_t total = 0;
  if (model.encoder) total += mac_count_encoder(model.encoder->spec, window_len);
  if (model.classifier) total += mac_count_classifier(model.classifier->spec, window_len);
  return total;
}

namespace {

double percentile_sorted(const std::vector<double>& sorted, double q) {
  const size_t n = sorted.size();
  const size_t idx = std::min(n - 1, static_cast<size_t>(std::ceil(q * n)) - 1);
  return sorted[idx];
}

}  // namespace

LatencyReport time_pipeline(const PipelineModel& model, const TimeSeriesDataset& test,
                            int samples_per_window, int repetitions, std::string scheme_name) {
  if (!model.classifier) throw ConfigError("time_pipeline: empty model");
  if (repetitions < 1) throw ConfigError("time_pipeline: need >= 1 repetition");
  if (samples_per_window < 1) throw ConfigError("time_pipeline: window must be >= 1 sample");
  if (test.rows() < static_cast<size_t>(samples_per_window)) {
    throw DataError("time_pipeline: test set has " + std::to_string(test.rows()) +
                    " rows, need >= " + std::to_string(samples_per_window));
  }
  const int nwin = static_cast<int>(test.rows() / static_cast<size_t>(samples_per_window));

  LatencyReport rep;
  rep.scheme = std::move(scheme_name);
  rep.window_micros.resize(static_cast<size_t>(nwin));
  rep.window_micros_mean.resize(static_cast<size_t>(nwin));
  rep.mac_per_window = mac_count(model, samples_per_window);
  if (model.encoder) {
    rep.param_count += model.encoder->params.param_count();
    rep.serialized_bytes += model.encoder->params.byte_size();
  }
  rep.param_count += model.classifier->params.param_count();
  rep.serialized_bytes += model.classifier->params.byte_size();

  volatile int sink = 0;  // keep the pipeline from being optimized out
  auto run_window = [&](int w) {
    const TensorF block = test.feature_block(static_cast<size_t>(w) * samples_per_window,
                                             static_cast<size_t>(samples_per_window));
    const TensorF reps = model.encoder ? encode(*model.encoder, block) : block;
    const std::vector<int> preds = classify(*model.classifier, reps);
    sink = sink + preds.back();
  };

  run_window(0);  // warm-up
  for (int w = 0; w < nwin; ++w) {
    double best = 0.0, sum = 0.0;
    for (int r = 0; r < repetitions; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      run_window(w);
      const auto t1 = std::chrono::steady_clock::now();
      const double us = std::chrono::duration<double, std::micro>(t1 - t0).count();
      best = r == 0 ? us : std::min(best, us);
      sum += us;
    }
    rep.window_micros[static_cast<size_t>(w)] = best;
    rep.window_micros_mean[static_cast<size_t>(w)] = sum / repetitions;
  }

  std::vector<double> sorted = rep.window_micros;
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double v : sorted) total += v;
  rep.mean = total / nwin;
  rep.median = nwin % 2 == 1 ? sorted[static_cast<size_t>(nwin / 2)]
                             : 0.5 * (sorted[static_cast<size_t>(nwin / 2 - 1)] +
                                      sorted[static_cast<size_t>(nwin / 2)]);
  rep.p95 = percentile_sorted(sorted, 0.95);
  return rep;
}

MannWhitneyResult mann_whitney(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n1 = a.size(), n2 = b.size();
  if (n1 == 0 || n2 == 0) throw DataError("mann_whitney: empty sample");
  struct Obs {
    double v;
    int group;
  };
  std::vector<Obs> all;
  all.reserve(n1 + n2);
  for (double v : a) all.push_back({v, 0});
  for (double v : b) all.push_back({v, 1});
  std::sort(all.begin(), all.end(), [](const Obs& x, const Obs& y) { return x.v < y.v; });

  // Average ranks over tie groups; accumulate the tie correction term.
  const size_t n = all.size();
  std::vector<double> rank(n);
  double tie_term = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && all[j + 1].v == all[i].v) ++j;
    const double avg = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t t = i; t <= j; ++t) rank[t] = avg;
    const double tsize = static_cast<double>(j - i + 1);
    tie_term += tsize * tsize * tsize - tsize;
    i = j + 1;
  }

  double r1 = 0.0;
  for (size_t t = 0; t < n; ++t) {
    if (all[t].group == 0) r1 += rank[t];
  }
  const double u1 = r1 - static_cast<double>(n1) * (n1 + 1) / 2.0;
  const double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
  const double nn = static_cast<double>(n);
  const double var = (static_cast<double>(n1) * static_cast<double>(n2) / 12.0) *
                     ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));

  MannWhitneyResult res;
  res.u_statistic = u1;
  if (var <= 0.0) {
    res.p_value = 1.0;
    res.direction = 0;
    return res;
  }
  const double cc = u1 > mu ? -0.5 : (u1 < mu ? 0.5 : 0.0);  // continuity correction
  const double z = (u1 - mu + cc) / std::sqrt(var);
  res.p_value = std::min(1.0, std::erfc(std::fabs(z) / std::sqrt(2.0)));
  res.direction = u1 < mu ? -1 : (u1 > mu ? 1 : 0);
  return res;
}

MannWhitneyResult compare_latency(const LatencyReport& a, const LatencyReport& b) {
  if (a.window_micros.size() < 30 || b.window_micros.size() < 30) {
    throw DataError("compare_latency: need >= 30 windows per side, got " +
                    std::to_string(a.window_micros.size()) + " and " +
                    std::to_string(b.window_micros.size()));
  }
  return mann_whitney(a.window_micros, b.window_micros);
}

}  // namespace fsfl
