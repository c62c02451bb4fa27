#include "fsfl/eval.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "fsfl/parallel.hpp"

namespace fsfl {

double windowed_accuracy(const Autoencoder* encoder, const Classifier& cls,
                         const TimeSeriesDataset& test, int window) {
  if (window < 1) throw ConfigError("windowed_accuracy: window must be >= 1");
  const size_t rows = test.rows();
  if (rows < static_cast<size_t>(window)) {
    throw DataError("windowed_accuracy: test set has " + std::to_string(rows) +
                    " rows, need >= " + std::to_string(window));
  }
  const int nwin = static_cast<int>(rows / static_cast<size_t>(window));
  std::vector<long> correct(static_cast<size_t>(nwin), 0);
  par::parallel_for(nwin, [&](int w) {
    const size_t begin = static_cast<size_t>(w) * window;
    const TensorF block = test.feature_block(begin, static_cast<size_t>(window));
    const TensorF reps = encoder ? encode(*encoder, block) : block;
    const std::vector<int> preds = classify(cls, reps);
    long c = 0;
    for (int t = 0; t < window; ++t) {
      if (preds[static_cast<size_t>(t)] == test.labels[begin + static_cast<size_t>(t)]) ++c;
    }
    correct[static_cast<size_t>(w)] = c;
  });
  double acc_sum = 0.0;
  for (long c : correct) acc_sum += static_cast<double>(c) / window;
  return acc_sum / nwin;
}

std::vector<AggregateMetrics> aggregate_replicates(const std::vector<RoundMetrics>& rows) {
  if (rows.empty()) throw DataError("aggregate_replicates: empty metrics");
  std::map<std::pair<std::string, int>, std::vector<double>> groups;
  for (const RoundMetrics& r : rows) {
    groups[{r.scheme, r.round}].push_back(r.accuracy);
  }
  std::vector<AggregateMetrics> out;
  out.reserve(groups.size());
  for (auto& [key, accs] : groups) {
    // Summation in sorted order makes aggregation exactly permutation
    // invariant over replicates.
    std::sort(accs.begin(), accs.end());
    AggregateMetrics a;
    a.scheme = key.first;
    a.round = key.second;
    a.count = static_cast<int>(accs.size());
    double sum = 0.0;
    for (double v : accs) sum += v;
    a.mean = sum / a.count;
    // accs is sorted; identical replicates report exactly zero spread.
    if (a.count > 1 && accs.front() != accs.back()) {
      double sq = 0.0;
      for (double v : accs) sq += (v - a.mean) * (v - a.mean);
      a.stderr_value = std::sqrt(sq / (a.count - 1)) / std::sqrt(static_cast<double>(a.count));
    }
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace fsfl
