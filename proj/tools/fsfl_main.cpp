#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fsfl/bench.hpp"
#include "fsfl/checkpoint.hpp"
#include "fsfl/config.hpp"
#include "fsfl/runner.hpp"

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitConfigError = 1;
constexpr int kExitRuntimeError = 2;

void emit_error(const char* type, const std::string& message) {
  json err = {{"error", {{"type", type}, {"message", message}}}};
  std::cerr << err.dump() << "\n";
}

int cmd_run(const std::string& config_path, const std::string& out_override,
            int replicates_override, long long seed_override) {
  fsfl::ExperimentConfig cfg = fsfl::parse_config(config_path);
  if (!out_override.empty()) cfg.out_dir = out_override;
  if (replicates_override > 0) cfg.replicates = replicates_override;
  if (seed_override >= 0) {
    cfg.fed.seed = static_cast<uint64_t>(seed_override);
    cfg.dataset.synth.seed = cfg.fed.seed;
  }
  cfg.validate();

  const fsfl::RunResult result = fsfl::run_experiments(cfg);
  std::cout << "wrote " << cfg.out_dir << "/metrics.csv (" << result.metrics.size()
            << " rows), " << cfg.out_dir << "/aggregate.csv (" << result.aggregates.size()
            << " rows), " << result.checkpoint_paths.size() << " checkpoint(s)\n";
  int last_round = 0;
  for (const fsfl::AggregateMetrics& a : result.aggregates) last_round = std::max(last_round, a.round);
  for (const fsfl::AggregateMetrics& a : result.aggregates) {
    if (a.round == last_round) {
      std::printf("%-10s round %3d: accuracy %.4f +- %.4f (n=%d)\n", a.scheme.c_str(),
                  a.round, a.mean, a.stderr_value, a.count);
    }
  }
  return kExitOk;
}

json report_to_json(const fsfl::LatencyReport& r) {
  return {{"scheme", r.scheme},
          {"windows", r.window_micros.size()},
          {"mean_us", r.mean},
          {"median_us", r.median},
          {"p95_us", r.p95},
          {"mac_per_window", r.mac_per_window},
          {"param_count", r.param_count},
          {"serialized_bytes", r.serialized_bytes}};
}

int cmd_bench(const std::string& config_path, const std::string& checkpoint_path,
              const std::string& out_dir, int repetitions) {
  fsfl::ExperimentConfig cfg = fsfl::parse_config(config_path);
  if (repetitions > 0) cfg.bench_repetitions = repetitions;

  fsfl::TimeSeriesDataset test;
  if (cfg.dataset.kind == fsfl::DatasetSource::Kind::Synthetic) {
    test = fsfl::synth_generate(cfg.dataset.synth).second;
  } else {
    test = fsfl::load_csv(cfg.dataset.test_csv);
    test.sample_rate_hz = cfg.dataset.sample_rate_hz;
    test.participants = cfg.dataset.participants;
    if (cfg.dataset.num_classes_override > 0) test.num_classes = cfg.dataset.num_classes_override;
  }
  const int num_classes = test.num_classes;
  const int nf = test.num_features;
  const int d = fsfl::repr_dim(nf, cfg.fed.compression_ratio);

  const fsfl::Checkpoint ckpt = fsfl::load_checkpoint(checkpoint_path);

  // Semi-supervised pipeline: encoder + compact classifier. Loaded from the
  // checkpoint when it holds an autoencoder, otherwise built fresh (latency
  // does not depend on the weight values).
  fsfl::Autoencoder ae = fsfl::build_autoencoder({cfg.fed.ae_variant, nf, d}, cfg.fed.seed);
  fsfl::Classifier semi_cls =
      fsfl::build_classifier({cfg.fed.head, d, num_classes, 0}, cfg.fed.seed);
  fsfl::Classifier sup_cls =
      fsfl::build_classifier({fsfl::HeadKind::LSTM, nf, num_classes, 0}, cfg.fed.seed);
  if (!ckpt.autoencoder.tensors.empty()) {
    if (ckpt.autoencoder.param_count() != ae.params.param_count() ||
        ckpt.classifier.param_count() != semi_cls.params.param_count()) {
      throw fsfl::ConfigError("bench: checkpoint does not match the config's model shapes");
    }
    ae.params = ckpt.autoencoder;
    semi_cls.params = ckpt.classifier;
  } else if (!ckpt.classifier.tensors.empty()) {
    if (ckpt.classifier.param_count() != sup_cls.params.param_count()) {
      throw fsfl::ConfigError("bench: checkpoint does not match the config's model shapes");
    }
    sup_cls.params = ckpt.classifier;
  }

  const int spw = static_cast<int>(test.sample_rate_hz + 0.5);  // one second of samples
  const fsfl::LatencyReport semi = fsfl::time_pipeline({&ae, &semi_cls}, test, spw,
                                                       cfg.bench_repetitions, "SEMI");
  const fsfl::LatencyReport sup = fsfl::time_pipeline({nullptr, &sup_cls}, test, spw,
                                                      cfg.bench_repetitions, "SUPERVISED");

  json summary = {{"samples_per_window", spw},
                  {"repetitions", cfg.bench_repetitions},
                  {"semi", report_to_json(semi)},
                  {"supervised", report_to_json(sup)}};
  if (semi.window_micros.size() >= 30 && sup.window_micros.size() >= 30) {
    const fsfl::MannWhitneyResult mw = fsfl::compare_latency(semi, sup);
    summary["mann_whitney"] = {{"u", mw.u_statistic},
                               {"p_value", mw.p_value},
                               {"direction", mw.direction},
                               {"semi_faster", mw.direction < 0}};
  }
  std::cout << summary.dump(2) << "\n";

  if (!out_dir.empty()) {
    std::ofstream csv(out_dir + "/latency.csv", std::ios::binary);
    csv << "scheme,window_index,micros\r\n";
    for (const fsfl::LatencyReport* r : {&semi, &sup}) {
      for (size_t w = 0; w < r->window_micros.size(); ++w) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.3f", r->window_micros[w]);
        csv << r->scheme << "," << w << "," << buf << "\r\n";
      }
    }
    std::ofstream js(out_dir + "/bench_summary.json", std::ios::binary);
    js << summary.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_inspect(const std::string& checkpoint_path) {
  const fsfl::Checkpoint ckpt = fsfl::load_checkpoint(checkpoint_path);
  std::printf("checkpoint: %s\n", checkpoint_path.c_str());
  std::printf("config fingerprint: %016llx\n",
              static_cast<unsigned long long>(ckpt.config_fingerprint));
  const auto dump = [](const char* what, const fsfl::ModelParams& mp) {
    std::printf("%s: %zu tensors, %zu parameters, %zu bytes\n", what, mp.tensors.size(),
                mp.param_count(), mp.byte_size());
    for (const fsfl::NamedTensor& t : mp.tensors) {
      std::printf("  %-24s %-12s %8zu\n", t.name.c_str(), t.value.shape_str().c_str(),
                  t.value.numel());
    }
  };
  dump("autoencoder", ckpt.autoencoder);
  dump("classifier", ckpt.classifier);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator of semi-supervised federated learning for "
               "human-activity recognition on time-series sensor data"};
  app.require_subcommand(1);

  std::string run_config, run_out;
  int run_replicates = -1;
  long long run_seed = -1;
  CLI::App* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("config", run_config, "Path to the experiment config JSON")->required();
  run->add_option("--out", run_out, "Output directory (overrides the config)");
  run->add_option("--replicates", run_replicates, "Replicate count (overrides the config)");
  run->add_option("--seed", run_seed, "Base seed (overrides the config)");

  std::string bench_config, bench_ckpt, bench_out;
  int bench_reps = -1;
  CLI::App* bench = app.add_subcommand(
      "bench", "Time local inference (semi-supervised pipeline vs supervised classifier)");
  bench->add_option("config", bench_config, "Path to the experiment config JSON")->required();
  bench->add_option("--checkpoint", bench_ckpt, "Checkpoint with trained models")->required();
  bench->add_option("--out", bench_out, "Directory for latency.csv and bench_summary.json");
  bench->add_option("--repetitions", bench_reps, "Timed passes per window");

  std::string inspect_ckpt;
  CLI::App* inspect = app.add_subcommand("inspect", "List the tensors in a checkpoint");
  inspect->add_option("checkpoint", inspect_ckpt, "Checkpoint path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    emit_error("cli", e.what());
    return kExitConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(run_config, run_out, run_replicates, run_seed);
    if (bench->parsed()) return cmd_bench(bench_config, bench_ckpt, bench_out, bench_reps);
    if (inspect->parsed()) return cmd_inspect(inspect_ckpt);
  } catch (const fsfl::ConfigError& e) {
    emit_error("config", e.what());
    return kExitConfigError;
  } catch (const std::exception& e) {
    emit_error("runtime", e.what());
    return kExitRuntimeError;
  }
  return kExitOk;
}
