#include "fsfl/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <vector>

namespace fsfl {

uint64_t fnv1a64(const uint8_t* data, size_t n) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

namespace {

constexpr char kMagic[4] = {'F', 'S', 'F', 'L'};
constexpr uint32_t kVersion = 1;
constexpr const char* kFingerprintName = "meta.config_fingerprint";

void put_u16(std::vector<uint8_t>& buf, uint16_t v) {
  buf.push_back(static_cast<uint8_t>(v & 0xff));
  buf.push_back(static_cast<uint8_t>(v >> 8));
}

void put_u32(std::vector<uint8_t>& buf, uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<uint8_t>& buf, uint64_t v) {
  for (int i = 0; i < 8; ++i) buf.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
}

void put_f32(std::vector<uint8_t>& buf, float v) {
  uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(buf, bits);
}

struct Reader {
  const std::vector<uint8_t>& buf;
  size_t pos = 0;

  void need(size_t n, const char* what) const {
    if (pos + n > buf.size()) {
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            std::string("checkpoint: truncated while reading ") + what);
    }
  }
  uint16_t u16(const char* what) {
    need(2, what);
    const uint16_t v = static_cast<uint16_t>(buf[pos] | (buf[pos + 1] << 8));
    pos += 2;
    return v;
  }
  uint32_t u32(const char* what) {
    need(4, what);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(buf[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  float f32(const char* what) {
    const uint32_t bits = u32(what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string str(size_t n, const char* what) {
    need(n, what);
    std::string s(reinterpret_cast<const char*>(buf.data() + pos), n);
    pos += n;
    return s;
  }
};

void append_tensors(std::vector<uint8_t>& buf, const ModelParams& mp,
                    const std::string& prefix) {
  for (const NamedTensor& t : mp.tensors) {
    const std::string name = prefix + t.name;
    put_u16(buf, static_cast<uint16_t>(name.size()));
    buf.insert(buf.end(), name.begin(), name.end());
    put_u32(buf, static_cast<uint32_t>(t.value.rank()));
    for (int d : t.value.shape) put_u32(buf, static_cast<uint32_t>(d));
    for (float v : t.value.data) put_f32(buf, v);
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::vector<uint8_t> buf;
  buf.insert(buf.end(), kMagic, kMagic + 4);
  put_u32(buf, kVersion);
  const uint32_t count = static_cast<uint32_t>(ckpt.autoencoder.tensors.size() +
                                               ckpt.classifier.tensors.size() +
                                               (ckpt.config_fingerprint != 0 ? 1 : 0));
  put_u32(buf, count);
  append_tensors(buf, ckpt.autoencoder, "ae.");
  append_tensors(buf, ckpt.classifier, "cls.");
  if (ckpt.config_fingerprint != 0) {
    ModelParams meta;
    TensorF fp({8});
    for (int i = 0; i < 8; ++i) {
      fp.data[static_cast<size_t>(i)] =
          static_cast<float>((ckpt.config_fingerprint >> (8 * i)) & 0xff);
    }
    meta.add(kFingerprintName, std::move(fp));
    append_tensors(buf, meta, "");
  }
  put_u64(buf, fnv1a64(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "checkpoint: cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw CheckpointError(CheckpointError::Kind::Io, "checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::Io, "checkpoint: cannot open '" + path + "'");
  std::vector<uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  if (buf.size() < 20) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          "checkpoint: file too short (" + std::to_string(buf.size()) + " bytes)");
  }
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::BadMagic, "checkpoint: bad magic in '" + path + "'");
  }
  uint64_t stored = 0;
  for (int i = 0; i < 8; ++i) {
    stored |= static_cast<uint64_t>(buf[buf.size() - 8 + static_cast<size_t>(i)]) << (8 * i);
  }
  if (stored != fnv1a64(buf.data(), buf.size() - 8)) {
    throw CheckpointError(CheckpointError::Kind::ChecksumMismatch,
                          "checkpoint: checksum mismatch in '" + path + "'");
  }

  Reader r{buf};
  r.pos = 4;
  const uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw CheckpointError(CheckpointError::Kind::BadVersion,
                          "checkpoint: unsupported version " + std::to_string(version));
  }
  const uint32_t count = r.u32("tensor count");
  const size_t body_end = buf.size() - 8;

  Checkpoint ckpt;
  for (uint32_t t = 0; t < count; ++t) {
    const uint16_t name_len = r.u16("tensor name length");
    const std::string name = r.str(name_len, "tensor name");
    const uint32_t rank = r.u32("tensor rank");
    std::vector<int> shape(rank);
    size_t numel = 1;
    for (uint32_t d = 0; d < rank; ++d) {
      shape[d] = static_cast<int>(r.u32("tensor dim"));
      if (shape[d] <= 0) {
        throw CheckpointError(CheckpointError::Kind::Truncated,
                              "checkpoint: invalid dim in tensor '" + name + "'");
      }
      numel *= static_cast<size_t>(shape[d]);
    }
    TensorF tensor(shape);
    for (size_t i = 0; i < numel; ++i) tensor.data[i] = r.f32("tensor data");
    if (name == kFingerprintName) {
      uint64_t fp = 0;
      for (int i = 0; i < 8 && i < static_cast<int>(numel); ++i) {
        fp |= static_cast<uint64_t>(static_cast<uint8_t>(tensor.data[static_cast<size_t>(i)]))
              << (8 * i);
      }
      ckpt.config_fingerprint = fp;
    } else if (name.rfind("ae.", 0) == 0) {
      ckpt.autoencoder.add(name.substr(3), std::move(tensor));
    } else if (name.rfind("cls.", 0) == 0) {
      ckpt.classifier.add(name.substr(4), std::move(tensor));
    } else {
      throw CheckpointError(CheckpointError::Kind::Truncated,
                            "checkpoint: unexpected tensor name '" + name + "'");
    }
  }
  if (r.pos != body_end) {
    throw CheckpointError(CheckpointError::Kind::Truncated,
                          "checkpoint: " + std::to_string(body_end - r.pos) +
                              " unexpected trailing bytes");
  }
  return ckpt;
}

}  // namespace fsfl
