// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint directory layout:
//   manifest.json  {format_version, config, parameters: [{name, shape}]}
//   params.bin     little-endian float64 values, concatenated in manifest order

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "spil/network.hpp"

namespace spil {

inline constexpr int kCheckpointFormatVersion = 1;

struct ParameterRecord {
  std::string name;
  Shape shape;
  std::vector<double> data;
};

struct ModelCheckpoint {
  NetworkConfig config;
  std::vector<ParameterRecord> parameters;  // sorted by name
  int format_version = kCheckpointFormatVersion;
};

ModelCheckpoint make_checkpoint(const Network& net);

/// Rebuilds the network from the embedded config and copies the stored values
/// in. Throws IoError when names or shapes disagree with the config.
Network network_from_checkpoint(const ModelCheckpoint& ckpt);

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& dir);
/// Throws IoError on a format_version mismatch or a params.bin of the wrong length.
ModelCheckpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace spil
