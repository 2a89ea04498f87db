// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// Resolved configuration of one CLI invocation: network, training, part
// constants and data paths, loaded from JSON plus --key value overrides.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "spil/network.hpp"
#include "spil/pose.hpp"
#include "spil/training.hpp"

namespace spil::cli {

struct DataConfig {
  std::string train;  // pose or cloud JSON-lines
  std::string val;    // optional held-out set
  double conf_threshold = kDefaultConfThreshold;
};

struct RunConfig {
  NetworkConfig network = NetworkConfig::defaults();
  TrainConfig train;
  PartConstants parts;
  DataConfig data;
};

/// A dotted path such as "train.learning_rate" or "network.stages.*.local.num_heads"
/// and its raw text value. Values that parse as JSON keep their JSON type,
/// anything else is taken as a string.
using Override = std::pair<std::string, std::string>;

nlohmann::json to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);

/// Applies overrides in order to a config document. Network overrides first
/// expand the network section to its full form and drop derived widths so they
/// are recomputed, unless the override targets one of them.
void apply_overrides(nlohmann::json& doc, const std::vector<Override>& overrides);

/// Reads `path` (when given), applies overrides, validates.
RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const std::vector<Override>& overrides);

void save_run_config(const RunConfig& cfg, const std::filesystem::path& file);

}  // namespace spil::cli
