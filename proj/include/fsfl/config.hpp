#pragma once

#include <string>

#include <json.hpp>

#include "fsfl/data.hpp"
#include "fsfl/federation.hpp"

namespace fsfl {

struct DatasetSource {
  enum class Kind { Synthetic, Csv };
  Kind kind = Kind::Synthetic;
  SynthConfig synth;           // Synthetic
  std::string train_csv;       // Csv
  std::string test_csv;
  int participants = 4;        // Csv metadata overrides
  double sample_rate_hz = 33.0;
  int num_classes_override = 0;  // 0 = infer from labels
};

struct ExperimentConfig {
  FederationConfig fed;
  DatasetSource dataset;
  int replicates = 64;
  std::string out_dir = "out";
  int bench_repetitions = 10;

  void validate() const;
};

/// Strict JSON config parser: unknown keys are rejected, every range error
/// names the offending key, defaults are applied for everything optional.
/// See the README for the schema.
ExperimentConfig parse_config_json(const nlohmann::json& j);
ExperimentConfig parse_config(const std::string& path);

/// Canonical JSON form of the effective config (defaults applied); its dump
/// is what the checkpoint fingerprint hashes.
nlohmann::json config_to_json(const ExperimentConfig& cfg);
uint64_t config_fingerprint(const ExperimentConfig& cfg);

}  // namespace fsfl
