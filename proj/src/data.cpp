#include "fsfl/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fsfl/rng.hpp"

namespace fsfl {

TensorF TimeSeriesDataset::feature_block(size_t begin, size_t count) const {
  if (begin + count > rows()) {
    throw DataError("feature_block: rows [" + std::to_string(begin) + ", " +
                    std::to_string(begin + count) + ") outside dataset of " +
                    std::to_string(rows()));
  }
  TensorF out({static_cast<int>(count), num_features});
  std::copy_n(features.begin() + begin * static_cast<size_t>(num_features),
              count * static_cast<size_t>(num_features), out.data.begin());
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  cells.push_back(cur);
  return cells;
}

float parse_float_cell(const std::string& cell, size_t line_no) {
  size_t used = 0;
  float v = 0.0f;
  try {
    v = std::stof(cell, &used);
  } catch (const std::exception&) {
    throw DataError("csv: non-numeric cell '" + cell + "' at line " + std::to_string(line_no));
  }
  if (used != cell.size()) {
    throw DataError("csv: non-numeric cell '" + cell + "' at line " + std::to_string(line_no));
  }
  return v;
}

}  // namespace

TimeSeriesDataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("csv: no data rows in '" + path + "'");
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 2 || header.back() != "label") {
    throw DataError("csv: header must be f0,...,fN,label, got '" + line + "'");
  }
  const int nf = static_cast<int>(header.size()) - 1;
  for (int i = 0; i < nf; ++i) {
    if (header[static_cast<size_t>(i)] != "f" + std::to_string(i)) {
      throw DataError("csv: unknown header column '" + header[static_cast<size_t>(i)] +
                      "', expected 'f" + std::to_string(i) + "'");
    }
  }
  TimeSeriesDataset ds;
  ds.num_features = nf;
  size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::vector<std::string> cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError("csv: ragged row with " + std::to_string(cells.size()) +
                      " cells (expected " + std::to_string(header.size()) + ") at line " +
                      std::to_string(line_no));
    }
    for (int i = 0; i < nf; ++i) {
      ds.features.push_back(parse_float_cell(cells[static_cast<size_t>(i)], line_no));
    }
    const float raw = parse_float_cell(cells.back(), line_no);
    const int label = static_cast<int>(std::lround(raw));
    if (std::fabs(raw - static_cast<float>(label)) > 1e-6f || label < 0) {
      throw DataError("csv: non-integer label '" + cells.back() + "' at line " +
                      std::to_string(line_no));
    }
    ds.labels.push_back(label);
    max_label = std::max(max_label, label);
  }
  if (ds.labels.empty()) throw DataError("csv: no data rows in '" + path + "'");
  ds.num_classes = max_label + 1;
  return ds;
}

namespace {

void validate_synth(const SynthConfig& cfg) {
  if (cfg.num_classes < 2) throw ConfigError("synthetic: num_classes must be >= 2");
  if (cfg.num_features < 1) throw ConfigError("synthetic: num_features must be >= 1");
  if (cfg.train_len < 1 || cfg.test_len < 1) throw ConfigError("synthetic: lengths must be >= 1");
  if (cfg.dwell < 1.0) throw ConfigError("synthetic: dwell must be >= 1");
  if (cfg.noise < 0.0) throw ConfigError("synthetic: noise must be >= 0");
  if (cfg.participants < 1) throw ConfigError("synthetic: participants must be >= 1");
}

// Fixed template hash stream, independent of the dataset seed.
constexpr uint64_t kTemplateKey = 0x7e3a91c4b5d60f12ULL;

void generate_split(const SynthConfig& cfg, uint64_t split_tag, int len, TimeSeriesDataset& ds) {
  ds.num_features = cfg.num_features;
  ds.num_classes = cfg.num_classes;
  ds.sample_rate_hz = cfg.sample_rate_hz;
  ds.participants = cfg.participants;
  ds.features.reserve(static_cast<size_t>(len) * cfg.num_features);
  ds.labels.reserve(static_cast<size_t>(len));

  std::vector<std::vector<float>> templates(static_cast<size_t>(cfg.num_classes));
  for (int k = 0; k < cfg.num_classes; ++k) {
    templates[static_cast<size_t>(k)] = synth_class_template(cfg, k);
  }
  // Per-class sinusoid phases vary with the dataset seed.
  std::vector<std::vector<double>> phases(static_cast<size_t>(cfg.num_classes));
  for (int k = 0; k < cfg.num_classes; ++k) {
    Rng prng = Rng::keyed(cfg.seed, static_cast<uint64_t>(RngTag::SynthChain), split_tag,
                          1000 + static_cast<uint64_t>(k));
    phases[static_cast<size_t>(k)].resize(static_cast<size_t>(cfg.num_features));
    for (int j = 0; j < cfg.num_features; ++j) {
      phases[static_cast<size_t>(k)][static_cast<size_t>(j)] = prng.uniform(0.0, 6.283185307179586);
    }
  }

  Rng chain = tagged_rng(cfg.seed, RngTag::SynthChain, split_tag);
  Rng noise = tagged_rng(cfg.seed, RngTag::SynthNoise, split_tag);
  const double stay = 1.0 - 1.0 / cfg.dwell;
  int cls = chain.uniform_int(0, cfg.num_classes - 1);
  for (int t = 0; t < len; ++t) {
    if (chain.next_double() >= stay) {
      const int hop = chain.uniform_int(0, cfg.num_classes - 2);
      cls = hop >= cls ? hop + 1 : hop;
    }
    const double freq = 0.4 + 0.25 * cls;
    const double omega_t = 6.283185307179586 * freq * t / cfg.sample_rate_hz;
    for (int j = 0; j < cfg.num_features; ++j) {
      const double wave =
          cfg.wave_amp *
          std::sin(omega_t + phases[static_cast<size_t>(cls)][static_cast<size_t>(j)]);
      const double v = templates[static_cast<size_t>(cls)][static_cast<size_t>(j)] + wave +
                       cfg.noise * noise.gaussian();
      ds.features.push_back(static_cast<float>(v));
    }
    ds.labels.push_back(cls);
  }
}

}  // namespace

std::vector<float> synth_class_template(const SynthConfig& cfg, int cls) {
  std::vector<float> tpl(static_cast<size_t>(cfg.num_features));
  // Hash part plus a class-indicator boost on features j with
  // j % num_classes == cls, which pins the minimum pairwise separation.
  constexpr double kBoost = 1.2;
  for (int j = 0; j < cfg.num_features; ++j) {
    Rng r = Rng::keyed(kTemplateKey, static_cast<uint64_t>(cls), static_cast<uint64_t>(j));
    double v = r.uniform(-0.4, 0.4);
    if (j % cfg.num_classes == cls % cfg.num_classes) v += kBoost;
    tpl[static_cast<size_t>(j)] = static_cast<float>(v);
  }
  return tpl;
}

std::pair<TimeSeriesDataset, TimeSeriesDataset> synth_generate(const SynthConfig& cfg) {
  validate_synth(cfg);
  TimeSeriesDataset train, test;
  generate_split(cfg, 1, cfg.train_len, train);
  generate_split(cfg, 2, cfg.test_len, test);
  return {std::move(train), std::move(test)};
}

int repr_dim(int num_features, double ratio) {
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ConfigError("repr_dim: compression ratio must be in (0,1), got " +
                      std::to_string(ratio));
  }
  const int d = static_cast<int>(std::floor(ratio * num_features + 0.5));
  return std::max(1, d);
}

namespace {

// The 100 contiguous divisions used by both the labelled subset and IID
// partitioning; remainder rows go to the last division.
struct Division {
  size_t start, len;
};

std::vector<Division> hundred_divisions(size_t rows) {
  const size_t base = rows / 100;
  std::vector<Division> divs(100);
  for (size_t i = 0; i < 100; ++i) divs[i] = {i * base, base};
  divs[99].len = rows - divs[99].start;
  return divs;
}

int round_half_up_100(double ratio) {
  return static_cast<int>(std::floor(100.0 * ratio + 0.5));
}

}  // namespace

TimeSeriesDataset sample_labeled_subset(const TimeSeriesDataset& train, double label_ratio,
                                        uint64_t seed) {
  if (!(label_ratio > 0.0 && label_ratio <= 1.0)) {
    throw ConfigError("label_ratio must be in (0,1], got " + std::to_string(label_ratio));
  }
  if (train.rows() < 100) {
    throw DataError("sample_labeled_subset: training set has " + std::to_string(train.rows()) +
                    " rows, need >= 100");
  }
  const int count = std::min(100, std::max(1, round_half_up_100(label_ratio)));
  std::vector<int> order(100);
  for (int i = 0; i < 100; ++i) order[static_cast<size_t>(i)] = i;
  Rng rng = tagged_rng(seed, RngTag::LabeledSubset);
  for (int i = 0; i < count; ++i) {
    const int j = rng.uniform_int(i, 99);
    std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
  }
  std::vector<int> chosen(order.begin(), order.begin() + count);
  std::sort(chosen.begin(), chosen.end());

  const std::vector<Division> divs = hundred_divisions(train.rows());
  TimeSeriesDataset out;
  out.num_features = train.num_features;
  out.num_classes = train.num_classes;
  out.sample_rate_hz = train.sample_rate_hz;
  out.participants = train.participants;
  for (int idx : chosen) {
    const Division& d = divs[static_cast<size_t>(idx)];
    out.features.insert(out.features.end(),
                        train.features.begin() + d.start * train.num_features,
                        train.features.begin() + (d.start + d.len) * train.num_features);
    out.labels.insert(out.labels.end(), train.labels.begin() + static_cast<long>(d.start),
                      train.labels.begin() + static_cast<long>(d.start + d.len));
  }
  return out;
}

namespace {

struct Fragment {
  size_t start, len;
};

std::vector<Fragment> fragments_for_client(const TimeSeriesDataset& train, int participants,
                                           bool iid, uint64_t seed, int client_id,
                                           size_t* n_k_out) {
  const size_t rows = train.rows();
  const size_t n_k = rows / static_cast<size_t>(participants);
  *n_k_out = n_k;
  Rng rng = tagged_rng(seed, RngTag::Partition, static_cast<uint64_t>(client_id),
                       iid ? 1 : 2);
  std::vector<Fragment> frags;
  if (iid) {
    if (n_k < 100) {
      throw DataError("partition_iid: n_k = " + std::to_string(n_k) + " samples per client, need >= 100");
    }
    const size_t frag_len = n_k / 100;
    const std::vector<Division> divs = hundred_divisions(rows);
    frags.reserve(100);
    for (const Division& d : divs) {
      const size_t slack = d.len - frag_len;
      const size_t off = slack > 0 ? static_cast<size_t>(rng.uniform_int(0, static_cast<int>(slack))) : 0;
      frags.push_back(Fragment{d.start + off, frag_len});
    }
  } else {
    if (n_k > rows) {
      throw DataError("partition_noniid: n_k = " + std::to_string(n_k) + " exceeds dataset rows " +
                      std::to_string(rows));
    }
    const size_t slack = rows - n_k;
    const size_t start =
        slack > 0 ? static_cast<size_t>(rng.uniform_int(0, static_cast<int>(slack))) : 0;
    frags.push_back(Fragment{start, n_k});
  }
  return frags;
}

template <typename Part>
std::vector<Part> partition_impl(const TimeSeriesDataset& train, int num_clients,
                                 int participants, uint64_t seed, bool iid) {
  if (num_clients < 1) throw ConfigError("partition: num_clients must be >= 1");
  if (participants < 1) throw ConfigError("partition: participants must be >= 1");
  std::vector<Part> parts(static_cast<size_t>(num_clients));
  for (int k = 0; k < num_clients; ++k) {
    size_t n_k = 0;
    const std::vector<Fragment> frags =
        fragments_for_client(train, participants, iid, seed, k, &n_k);
    Part& p = parts[static_cast<size_t>(k)];
    p.client_id = k;
    size_t total = 0;
    for (const Fragment& f : frags) {
      p.windows.push_back(train.feature_block(f.start, f.len));
      if constexpr (requires { p.window_labels; }) {
        p.window_labels.emplace_back(train.labels.begin() + static_cast<long>(f.start),
                                     train.labels.begin() + static_cast<long>(f.start + f.len));
      }
      total += f.len;
    }
    p.n_k = total;
  }
  return parts;
}

}  // namespace

std::vector<ClientPartition> partition_iid(const TimeSeriesDataset& train, int num_clients,
                                           int participants, uint64_t seed) {
  return partition_impl<ClientPartition>(train, num_clients, participants, seed, true);
}

std::vector<ClientPartition> partition_noniid(const TimeSeriesDataset& train, int num_clients,
                                              int participants, uint64_t seed) {
  return partition_impl<ClientPartition>(train, num_clients, participants, seed, false);
}

std::vector<LabeledClientPartition> partition_iid_labeled(const TimeSeriesDataset& train,
                                                          int num_clients, int participants,
                                                          uint64_t seed) {
  return partition_impl<LabeledClientPartition>(train, num_clients, participants, seed, true);
}

std::vector<LabeledClientPartition> partition_noniid_labeled(const TimeSeriesDataset& train,
                                                             int num_clients, int participants,
                                                             uint64_t seed) {
  return partition_impl<LabeledClientPartition>(train, num_clients, participants, seed, false);
}

}  // namespace fsfl
