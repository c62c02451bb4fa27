#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

#include "fsfl/checkpoint.hpp"

using namespace fsfl;

namespace {

struct TempFile {
  std::string path;
  explicit TempFile(const char* tag) {
    static int counter = 0;
    path = std::string("test_ckpt_") + tag + "_" + std::to_string(counter++) + ".fsfl";
  }
  ~TempFile() { std::remove(path.c_str()); }
};

std::vector<uint8_t> read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_all(const std::string& path, const std::vector<uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

bool bit_identical(const ModelParams& a, const ModelParams& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (size_t i = 0; i < a.tensors.size(); ++i) {
    if (a.tensors[i].name != b.tensors[i].name) return false;
    if (a.tensors[i].value.shape != b.tensors[i].value.shape) return false;
    if (std::memcmp(a.tensors[i].value.data.data(), b.tensors[i].value.data.data(),
                    a.tensors[i].value.numel() * sizeof(float)) != 0) {
      return false;
    }
  }
  return true;
}

}  // namespace

TEST_CASE("round trip is bit-exact for every model variant") {
  for (AeVariant v : {AeVariant::FC, AeVariant::CNN, AeVariant::LSTM}) {
    CAPTURE(to_string(v));
    Checkpoint ckpt;
    ckpt.autoencoder = build_autoencoder({v, 9, 4}, 11).params;
    ckpt.classifier = build_classifier({HeadKind::LSTM, 9, 3, 0}, 12).params;
    ckpt.config_fingerprint = 0xdeadbeefcafef00dULL;
    // Exercise odd payloads too.
    ckpt.classifier.at("head.dense.b").data[0] = -0.0f;

    TempFile f("rt");
    save_checkpoint(ckpt, f.path);
    const Checkpoint back = load_checkpoint(f.path);
    CHECK(bit_identical(back.autoencoder, ckpt.autoencoder));
    CHECK(bit_identical(back.classifier, ckpt.classifier));
    CHECK(back.config_fingerprint == ckpt.config_fingerprint);
  }
}

TEST_CASE("empty checkpoint is exactly header plus checksum") {
  TempFile f("empty");
  save_checkpoint(Checkpoint{}, f.path);
  const std::vector<uint8_t> bytes = read_all(f.path);
  // magic(4) + version(4) + count(4) + fnv64(8)
  CHECK(bytes.size() == 20);
  CHECK(std::memcmp(bytes.data(), "FSFL", 4) == 0);
  const Checkpoint back = load_checkpoint(f.path);
  CHECK(back.autoencoder.tensors.empty());
  CHECK(back.classifier.tensors.empty());
  CHECK(back.config_fingerprint == 0);
}

TEST_CASE("corruption errors are distinct by kind") {
  Checkpoint ckpt;
  ckpt.autoencoder = build_autoencoder({AeVariant::FC, 6, 3}, 1).params;
  ckpt.classifier = build_classifier({HeadKind::SOFTMAX, 3, 2, 0}, 2).params;
  ckpt.config_fingerprint = 42;
  TempFile f("corrupt");
  save_checkpoint(ckpt, f.path);
  const std::vector<uint8_t> good = read_all(f.path);

  SUBCASE("flipped payload byte fails the checksum") {
    std::vector<uint8_t> bad = good;
    bad[bad.size() / 2] ^= 0x40;
    write_all(f.path, bad);
    try {
      load_checkpoint(f.path);
      FAIL("expected checksum error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::ChecksumMismatch);
    }
  }
  SUBCASE("bad magic") {
    std::vector<uint8_t> bad = good;
    bad[0] = 'X';
    write_all(f.path, bad);
    try {
      load_checkpoint(f.path);
      FAIL("expected magic error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::BadMagic);
    }
  }
  SUBCASE("truncated file") {
    std::vector<uint8_t> bad(good.begin(), good.begin() + 10);
    write_all(f.path, bad);
    try {
      load_checkpoint(f.path);
      FAIL("expected truncation error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::Truncated);
    }
  }
  SUBCASE("unsupported version") {
    std::vector<uint8_t> bad = good;
    bad[4] = 2;  // version field, little-endian
    // Re-stamp the checksum so only the version is wrong.
    const uint64_t sum = fnv1a64(bad.data(), bad.size() - 8);
    for (int i = 0; i < 8; ++i) {
      bad[bad.size() - 8 + static_cast<size_t>(i)] = static_cast<uint8_t>((sum >> (8 * i)) & 0xff);
    }
    write_all(f.path, bad);
    try {
      load_checkpoint(f.path);
      FAIL("expected version error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::BadVersion);
    }
  }
  SUBCASE("missing file is an io error") {
    try {
      load_checkpoint("no_such_file.fsfl");
      FAIL("expected io error");
    } catch (const CheckpointError& e) {
      CHECK(e.kind() == CheckpointError::Kind::Io);
    }
  }
}

TEST_CASE("fnv1a64 reference values") {
  // Standard FNV-1a test vectors.
  CHECK(fnv1a64(nullptr, 0) == 0xcbf29ce484222325ULL);
  const char* a = "a";
  CHECK(fnv1a64(reinterpret_cast<const uint8_t*>(a), 1) == 0xaf63dc4c8601ec8cULL);
}
