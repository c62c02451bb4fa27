#include "fsfl/config.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "fsfl/checkpoint.hpp"

namespace fsfl {

namespace {

using nlohmann::json;

void reject_unknown(const json& j, const std::set<std::string>& known, const char* where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (!known.count(key)) {
      throw ConfigError(std::string("config: unknown key '") + key + "' in " + where);
    }
  }
}

double get_number(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) {
    throw ConfigError(std::string("config: '") + key + "' must be a number");
  }
  return j[key].get<double>();
}

int get_int(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) {
    throw ConfigError(std::string("config: '") + key + "' must be an integer");
  }
  return j[key].get<int>();
}

std::string get_string(const json& j, const char* key, const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) {
    throw ConfigError(std::string("config: '") + key + "' must be a string");
  }
  return j[key].get<std::string>();
}

Scheme parse_scheme(const std::string& s) {
  if (s == "SEMI") return Scheme::SEMI;
  if (s == "SUPERVISED") return Scheme::SUPERVISED;
  if (s == "CS") return Scheme::CS;
  if (s == "DA") return Scheme::DA;
  throw ConfigError("config: scheme must be SEMI|SUPERVISED|CS|DA, got '" + s + "'");
}

PartitionKind parse_partition(const std::string& s) {
  if (s == "IID") return PartitionKind::IID;
  if (s == "NONIID") return PartitionKind::NONIID;
  throw ConfigError("config: partition must be IID|NONIID, got '" + s + "'");
}

AeVariant parse_ae(const std::string& s) {
  if (s == "FC") return AeVariant::FC;
  if (s == "CNN") return AeVariant::CNN;
  if (s == "LSTM") return AeVariant::LSTM;
  throw ConfigError("config: ae must be FC|CNN|LSTM, got '" + s + "'");
}

HeadKind parse_head(const std::string& s) {
  if (s == "SOFTMAX") return HeadKind::SOFTMAX;
  if (s == "LSTM") return HeadKind::LSTM;
  throw ConfigError("config: classifier must be SOFTMAX|LSTM, got '" + s + "'");
}

DatasetSource parse_dataset(const json& j) {
  if (!j.is_object()) throw ConfigError("config: 'dataset' must be an object");
  reject_unknown(j, {"synthetic", "csv"}, "dataset");
  const bool has_synth = j.contains("synthetic");
  const bool has_csv = j.contains("csv");
  if (has_synth == has_csv) {
    throw ConfigError("config: dataset needs exactly one of 'synthetic' or 'csv'");
  }
  DatasetSource src;
  if (has_synth) {
    const json& s = j["synthetic"];
    if (!s.is_object()) throw ConfigError("config: 'synthetic' must be an object");
    reject_unknown(s,
                   {"classes", "features", "train_len", "test_len", "dwell", "noise",
                    "wave_amp", "sample_rate_hz", "participants"},
                   "dataset.synthetic");
    src.kind = DatasetSource::Kind::Synthetic;
    SynthConfig def;
    src.synth.num_classes = get_int(s, "classes", def.num_classes);
    src.synth.num_features = get_int(s, "features", def.num_features);
    src.synth.train_len = get_int(s, "train_len", def.train_len);
    src.synth.test_len = get_int(s, "test_len", def.test_len);
    src.synth.dwell = get_number(s, "dwell", def.dwell);
    src.synth.noise = get_number(s, "noise", def.noise);
    src.synth.wave_amp = get_number(s, "wave_amp", def.wave_amp);
    src.synth.sample_rate_hz = get_number(s, "sample_rate_hz", def.sample_rate_hz);
    src.synth.participants = get_int(s, "participants", def.participants);
  } else {
    const json& c = j["csv"];
    if (!c.is_object()) throw ConfigError("config: 'csv' must be an object");
    reject_unknown(c, {"train", "test", "participants", "sample_rate_hz", "num_classes"},
                   "dataset.csv");
    src.kind = DatasetSource::Kind::Csv;
    src.train_csv = get_string(c, "train", "");
    src.test_csv = get_string(c, "test", "");
    if (src.train_csv.empty() || src.test_csv.empty()) {
      throw ConfigError("config: dataset.csv needs both 'train' and 'test' paths");
    }
    src.participants = get_int(c, "participants", 4);
    src.sample_rate_hz = get_number(c, "sample_rate_hz", 33.0);
    src.num_classes_override = get_int(c, "num_classes", 0);
  }
  return src;
}

}  // namespace

void ExperimentConfig::validate() const {
  fed.validate();
  if (replicates < 1) throw ConfigError("replicates: must be >= 1, got " + std::to_string(replicates));
  if (bench_repetitions < 1) throw ConfigError("bench_repetitions: must be >= 1");
  if (out_dir.empty()) throw ConfigError("out_dir: must not be empty");
}

ExperimentConfig parse_config_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  reject_unknown(j,
                 {"scheme", "dataset", "K", "C", "T", "lr_a", "lr_s", "e_a", "e_s", "r_l",
                  "r_f", "partition", "ae", "classifier", "seed", "replicates", "eval_every",
                  "window", "out_dir", "bagging", "bench_repetitions"},
                 "config");
  if (!j.contains("scheme")) throw ConfigError("config: missing required key 'scheme'");
  if (!j.contains("dataset")) throw ConfigError("config: missing required key 'dataset'");

  ExperimentConfig cfg;
  cfg.fed.scheme = parse_scheme(get_string(j, "scheme", ""));
  cfg.dataset = parse_dataset(j["dataset"]);
  cfg.fed.num_clients = get_int(j, "K", 100);
  cfg.fed.client_fraction = get_number(j, "C", 0.1);
  cfg.fed.rounds = get_int(j, "T", 50);
  cfg.fed.lr_autoencoder = static_cast<float>(get_number(j, "lr_a", 0.01));
  cfg.fed.lr_classifier = static_cast<float>(get_number(j, "lr_s", 0.001));
  cfg.fed.epochs_autoencoder = get_int(j, "e_a", 2);
  cfg.fed.epochs_classifier = get_int(j, "e_s", 5);
  cfg.fed.label_ratio = get_number(j, "r_l", 0.5);
  cfg.fed.compression_ratio = get_number(j, "r_f", 0.5);
  cfg.fed.partition = parse_partition(get_string(j, "partition", "IID"));
  cfg.fed.ae_variant = parse_ae(get_string(j, "ae", "LSTM"));
  cfg.fed.head = parse_head(get_string(j, "classifier", "SOFTMAX"));
  const double seed = get_number(j, "seed", 1);
  if (seed < 0 || seed > 9.0e15 || seed != std::floor(seed)) {
    throw ConfigError("config: 'seed' must be a non-negative integer");
  }
  cfg.fed.seed = static_cast<uint64_t>(seed);
  cfg.fed.eval_every = get_int(j, "eval_every", 2);
  cfg.fed.eval_window = get_int(j, "window", 5000);
  cfg.replicates = get_int(j, "replicates", 64);
  cfg.out_dir = get_string(j, "out_dir", "out");
  cfg.bench_repetitions = get_int(j, "bench_repetitions", 10);

  if (j.contains("bagging")) {
    const json& b = j["bagging"];
    if (!b.is_object()) throw ConfigError("config: 'bagging' must be an object");
    reject_unknown(b, {"batch_min", "batch_max", "seq_min", "seq_max"}, "bagging");
    cfg.fed.bagging.batch_min = get_int(b, "batch_min", cfg.fed.bagging.batch_min);
    cfg.fed.bagging.batch_max = get_int(b, "batch_max", cfg.fed.bagging.batch_max);
    cfg.fed.bagging.seq_min = get_int(b, "seq_min", cfg.fed.bagging.seq_min);
    cfg.fed.bagging.seq_max = get_int(b, "seq_max", cfg.fed.bagging.seq_max);
  }

  cfg.dataset.synth.seed = cfg.fed.seed;
  cfg.validate();
  return cfg;
}

ExperimentConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: invalid JSON in '" + path + "': " + e.what());
  }
  return parse_config_json(j);
}

nlohmann::json config_to_json(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["scheme"] = to_string(cfg.fed.scheme);
  j["K"] = cfg.fed.num_clients;
  j["C"] = cfg.fed.client_fraction;
  j["T"] = cfg.fed.rounds;
  j["lr_a"] = cfg.fed.lr_autoencoder;
  j["lr_s"] = cfg.fed.lr_classifier;
  j["e_a"] = cfg.fed.epochs_autoencoder;
  j["e_s"] = cfg.fed.epochs_classifier;
  j["r_l"] = cfg.fed.label_ratio;
  j["r_f"] = cfg.fed.compression_ratio;
  j["partition"] = to_string(cfg.fed.partition);
  j["ae"] = to_string(cfg.fed.ae_variant);
  j["classifier"] = to_string(cfg.fed.head);
  j["seed"] = cfg.fed.seed;
  j["replicates"] = cfg.replicates;
  j["eval_every"] = cfg.fed.eval_every;
  j["window"] = cfg.fed.eval_window;
  j["bagging"] = {{"batch_min", cfg.fed.bagging.batch_min},
                  {"batch_max", cfg.fed.bagging.batch_max},
                  {"seq_min", cfg.fed.bagging.seq_min},
                  {"seq_max", cfg.fed.bagging.seq_max}};
  if (cfg.dataset.kind == DatasetSource::Kind::Synthetic) {
    j["dataset"] = {{"synthetic",
                     {{"classes", cfg.dataset.synth.num_classes},
                      {"features", cfg.dataset.synth.num_features},
                      {"train_len", cfg.dataset.synth.train_len},
                      {"test_len", cfg.dataset.synth.test_len},
                      {"dwell", cfg.dataset.synth.dwell},
                      {"noise", cfg.dataset.synth.noise},
                      {"wave_amp", cfg.dataset.synth.wave_amp},
                      {"sample_rate_hz", cfg.dataset.synth.sample_rate_hz},
                      {"participants", cfg.dataset.synth.participants}}}};
  } else {
    j["dataset"] = {{"csv",
                     {{"train", cfg.dataset.train_csv},
                      {"test", cfg.dataset.test_csv},
                      {"participants", cfg.dataset.participants},
                      {"sample_rate_hz", cfg.dataset.sample_rate_hz},
                      {"num_classes", cfg.dataset.num_classes_override}}}};
  }
  return j;
}

uint64_t config_fingerprint(const ExperimentConfig& cfg) {
  const std::string dump = config_to_json(cfg).dump();
  return fnv1a64(reinterpret_cast<const uint8_t*>(dump.data()), dump.size());
}

}  // namespace fsfl
