#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "fsfl/models.hpp"

namespace fsfl {

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, BadVersion, Truncated, ChecksumMismatch };

  CheckpointError(Kind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Container for the final global models of one replicate plus the
/// fingerprint of the experiment config that produced them.
struct Checkpoint {
  ModelParams autoencoder;  // may be empty (schemes without an autoencoder)
  ModelParams classifier;
  uint64_t config_fingerprint = 0;
};

/// Binary layout, little-endian throughout:
///   magic "FSFL" | u32 version = 1 | u32 tensor count
///   per tensor: u16 name length | name bytes | u32 rank | u32 dims... | f32 data...
///   trailing u64 FNV-1a checksum of all preceding bytes
/// Autoencoder tensors carry an "ae." prefix, classifier tensors "cls.";
/// a nonzero fingerprint rides along as the tensor "meta.config_fingerprint"
/// ([8] floats, one byte each). Round trips are bit-exact.
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

uint64_t fnv1a64(const uint8_t* data, size_t n);

}  // namespace fsfl
