#pragma once
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "alas/tensor.hpp"

// Checkpoints: a structured text header (version, config hash, stage,
// iteration, parameter manifest with shapes and payload offsets) followed by
// the raw little-endian float32 payload, then the frozen snapshot section.
// No serialization library: the round trip has to be bit-exact.

namespace alas::io {

// named parameter values captured at a stage boundary
using Snapshot = std::map<std::string, std::vector<float>>;

struct CheckpointMeta {
  uint64_t config_hash = 0;
  int stage = 0;
  long long iteration = 0;
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const ad::ParamStore<float>& params,
                     const std::map<std::string, Snapshot>& snapshots);

// `params` must already hold the architecture (same names and shapes); values
// and frozen flags are overwritten in place. Throws on a config-hash mismatch
// unless allow_hash_mismatch is set.
CheckpointMeta load_checkpoint(const std::string& path, uint64_t expected_config_hash,
                               ad::ParamStore<float>& params,
                               std::map<std::string, Snapshot>& snapshots,
                               bool allow_hash_mismatch = false);

std::string hex16(uint64_t v);
uint64_t parse_hex16(const std::string& s);

}  // namespace alas::io
