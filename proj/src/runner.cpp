#include "fsfl/runner.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fsfl/checkpoint.hpp"
#include "fsfl/parallel.hpp"

namespace fsfl {

namespace {

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("runner: cannot open '" + path + "' for writing");
  out << content;
}

}  // namespace

std::string metrics_to_csv(const std::vector<RoundMetrics>& rows) {
  std::string csv = "replicate_id,scheme,round,accuracy\r\n";
  for (const RoundMetrics& m : rows) {
    csv += std::to_string(m.replicate_id) + "," + m.scheme + "," + std::to_string(m.round) +
           "," + fmt_double(m.accuracy) + "\r\n";
  }
  return csv;
}

std::string aggregates_to_csv(const std::vector<AggregateMetrics>& rows) {
  std::string csv = "scheme,round,mean,stderr,n\r\n";
  for (const AggregateMetrics& a : rows) {
    csv += a.scheme + "," + std::to_string(a.round) + "," + fmt_double(a.mean) + "," +
           fmt_double(a.stderr_value) + "," + std::to_string(a.count) + "\r\n";
  }
  return csv;
}

RunResult run_experiments(const ExperimentConfig& cfg) {
  cfg.validate();
  std::filesystem::create_directories(cfg.out_dir);

  // CSV datasets are loaded once and shared; synthetic data is regenerated
  // per replicate from the replicate seed.
  TimeSeriesDataset csv_train, csv_test;
  if (cfg.dataset.kind == DatasetSource::Kind::Csv) {
    csv_train = load_csv(cfg.dataset.train_csv);
    csv_test = load_csv(cfg.dataset.test_csv);
    for (TimeSeriesDataset* ds : {&csv_train, &csv_test}) {
      ds->participants = cfg.dataset.participants;
      ds->sample_rate_hz = cfg.dataset.sample_rate_hz;
      if (cfg.dataset.num_classes_override > 0) {
        ds->num_classes = cfg.dataset.num_classes_override;
      }
    }
    if (cfg.dataset.num_classes_override == 0) {
      csv_train.num_classes = csv_test.num_classes =
          std::max(csv_train.num_classes, csv_test.num_classes);
    } else {
      for (const TimeSeriesDataset* ds : {&csv_train, &csv_test}) {
        for (size_t r = 0; r < ds->rows(); ++r) {
          if (ds->labels[r] >= ds->num_classes) {
            throw DataError("dataset: label " + std::to_string(ds->labels[r]) + " at row " +
                            std::to_string(r) + " exceeds num_classes " +
                            std::to_string(ds->num_classes));
          }
        }
      }
    }
  }

  const auto t_start = std::chrono::steady_clock::now();
  const uint64_t fingerprint = config_fingerprint(cfg);

  struct ReplicateOutput {
    std::vector<RoundMetrics> metrics;
    RoundLog log;
    std::string checkpoint_path;
    std::string error;
  };
  std::vector<ReplicateOutput> outs(static_cast<size_t>(cfg.replicates));

  par::parallel_for(cfg.replicates, [&](int i) {
    ReplicateOutput& out = outs[static_cast<size_t>(i)];
    try {
      FederationConfig fed = cfg.fed;
      fed.seed = cfg.fed.seed + static_cast<uint64_t>(i);
      GlobalState final_state;
      if (cfg.dataset.kind == DatasetSource::Kind::Synthetic) {
        SynthConfig synth = cfg.dataset.synth;
        synth.seed = fed.seed;
        const auto [train, test] = synth_generate(synth);
        out.metrics = run_experiment(fed, train, test, i, &out.log, &final_state);
      } else {
        out.metrics = run_experiment(fed, csv_train, csv_test, i, &out.log, &final_state);
      }
      Checkpoint ckpt;
      ckpt.autoencoder = std::move(final_state.autoencoder.params);
      ckpt.classifier = std::move(final_state.classifier.params);
      ckpt.config_fingerprint = fingerprint;
      out.checkpoint_path = cfg.out_dir + "/checkpoint_rep" + std::to_string(i) + ".fsfl";
      save_checkpoint(ckpt, out.checkpoint_path);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
  });

  for (const ReplicateOutput& out : outs) {
    if (!out.error.empty()) {
      throw DataError("replicate failed: " + out.error);
    }
  }

  RunResult result;
  for (ReplicateOutput& out : outs) {
    result.metrics.insert(result.metrics.end(), out.metrics.begin(), out.metrics.end());
    result.checkpoint_paths.push_back(std::move(out.checkpoint_path));
  }
  result.aggregates = aggregate_replicates(result.metrics);

  write_file(cfg.out_dir + "/metrics.csv", metrics_to_csv(result.metrics));
  write_file(cfg.out_dir + "/aggregate.csv", aggregates_to_csv(result.aggregates));

  // Wall-clock timestamps are confined to the log file.
  const auto t_end = std::chrono::steady_clock::now();
  std::string log = "config: " + config_to_json(cfg).dump() + "\n";
  log += "fingerprint: " + std::to_string(fingerprint) + "\n";
  for (size_t i = 0; i < outs.size(); ++i) {
    for (const std::string& msg : outs[i].log.messages) {
      log += "replicate " + std::to_string(i) + ": " + msg + "\n";
    }
  }
  log += "elapsed_ms: " +
         std::to_string(
             std::chrono::duration_cast<std::chrono::milliseconds>(t_end - t_start).count()) +
         "\n";
  write_file(cfg.out_dir + "/run.log", log);
  return result;
}

}  // namespace fsfl
