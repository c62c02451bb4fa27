#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "fsfl/checkpoint.hpp"
#include "fsfl/runner.hpp"

using namespace fsfl;
using nlohmann::json;

namespace {

struct TempDir {
  std::string path;
  explicit TempDir(const char* tag) {
    static int counter = 0;
    path = std::string("test_run_") + tag + "_" + std::to_string(counter++);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ExperimentConfig tiny_config(const std::string& out_dir, const char* scheme = "CS") {
  const json j = {{"scheme", scheme},
                  {"dataset",
                   {{"synthetic",
                     {{"train_len", 2000}, {"test_len", 600}, {"participants", 4}}}}},
                  {"K", 4},
                  {"C", 0.5},
                  {"T", 2},
                  {"replicates", 1},
                  {"window", 300},
                  {"seed", 5},
                  {"out_dir", out_dir}};
  return parse_config_json(j);
}

}  // namespace

TEST_CASE("run_experiments: files, rows and checkpoints for one replicate") {
  TempDir dir("basic");
  const ExperimentConfig cfg = tiny_config(dir.path);
  const RunResult result = run_experiments(cfg);

  REQUIRE(result.metrics.size() == 2);  // t = 0, 2
  CHECK(result.metrics[0].round == 0);
  CHECK(result.metrics[1].round == 2);
  CHECK(result.metrics[0].windows_evaluated == 2);

  const std::string metrics = slurp(dir.path + "/metrics.csv");
  CHECK(metrics.rfind("replicate_id,scheme,round,accuracy\r\n", 0) == 0);
  CHECK(metrics.find("0,CS,0,") != std::string::npos);
  CHECK(metrics.find("0,CS,2,") != std::string::npos);
  CHECK(metrics.find('\n') != std::string::npos);

  const std::string agg = slurp(dir.path + "/aggregate.csv");
  CHECK(agg.rfind("scheme,round,mean,stderr,n\r\n", 0) == 0);

  REQUIRE(result.checkpoint_paths.size() == 1);
  const Checkpoint ckpt = load_checkpoint(result.checkpoint_paths[0]);
  CHECK(ckpt.classifier.tensors.size() > 0);
  CHECK(ckpt.config_fingerprint == config_fingerprint(cfg));
  CHECK(std::filesystem::exists(dir.path + "/run.log"));
}

TEST_CASE("run_experiments: reruns are byte-identical") {
  TempDir dir1("rerun_a"), dir2("rerun_b");
  ExperimentConfig cfg1 = tiny_config(dir1.path, "SEMI");
  cfg1.replicates = 2;
  ExperimentConfig cfg2 = cfg1;
  cfg2.out_dir = dir2.path;

  run_experiments(cfg1);
  run_experiments(cfg2);
  CHECK(slurp(dir1.path + "/metrics.csv") == slurp(dir2.path + "/metrics.csv"));
  CHECK(slurp(dir1.path + "/aggregate.csv") == slurp(dir2.path + "/aggregate.csv"));
  CHECK(slurp(dir1.path + "/checkpoint_rep0.fsfl") == slurp(dir2.path + "/checkpoint_rep0.fsfl"));
  CHECK(slurp(dir1.path + "/checkpoint_rep1.fsfl") == slurp(dir2.path + "/checkpoint_rep1.fsfl"));
}

TEST_CASE("run_experiments: aggregate rows are the distinct (scheme, round) pairs") {
  TempDir dir("agg");
  ExperimentConfig cfg = tiny_config(dir.path);
  cfg.replicates = 3;
  const RunResult result = run_experiments(cfg);
  REQUIRE(result.metrics.size() == 6);
  std::set<std::pair<std::string, int>> pairs;
  for (const RoundMetrics& m : result.metrics) pairs.insert({m.scheme, m.round});
  CHECK(result.aggregates.size() == pairs.size());
  for (const AggregateMetrics& a : result.aggregates) {
    CHECK(a.count == 3);
    CHECK(pairs.count({a.scheme, a.round}) == 1);
  }
}

TEST_CASE("run_experiments: replicate seeds differ") {
  TempDir dir("seeds");
  ExperimentConfig cfg = tiny_config(dir.path, "SEMI");
  cfg.replicates = 2;
  const RunResult result = run_experiments(cfg);
  // Different replicate seeds regenerate different synthetic data, so the
  // round-0 accuracies differ almost surely.
  REQUIRE(result.metrics.size() == 4);
  CHECK(result.metrics[0].replicate_id == 0);
  CHECK(result.metrics[2].replicate_id == 1);
  CHECK(result.metrics[0].accuracy != result.metrics[2].accuracy);
}

TEST_CASE("metrics_to_csv: RFC-4180 shape") {
  std::vector<RoundMetrics> rows = {{0, "SEMI", 0, 0.5, 2}, {0, "SEMI", 2, 0.625, 2}};
  const std::string csv = metrics_to_csv(rows);
  CHECK(csv == "replicate_id,scheme,round,accuracy\r\n0,SEMI,0,0.5\r\n0,SEMI,2,0.625\r\n");
  std::vector<AggregateMetrics> agg = {{"SEMI", 0, 0.5, 0.0, 2}};
  CHECK(aggregates_to_csv(agg) == "scheme,round,mean,stderr,n\r\nSEMI,0,0.5,0,2\r\n");
}
