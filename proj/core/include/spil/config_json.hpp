// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

// JSON forms of the configuration structs. Parsing starts from a base value and
// overrides only the keys present; unknown keys are rejected.

#pragma once

#include <nlohmann/json.hpp>

#include "spil/network.hpp"
#include "spil/pose.hpp"
#include "spil/training.hpp"

namespace spil {

nlohmann::json to_json(const NetworkConfig& cfg);
nlohmann::json to_json(const TrainConfig& cfg);
nlohmann::json to_json(const AugmentConfig& cfg);
nlohmann::json to_json(const PartConstants& parts);

/// Accepts an optional "preset" key ("full", "desk", "micro") which replaces
/// `base` before the other keys apply. Stage widths that the JSON leaves out
/// (local.in_dim, global.dim, global.n_points) are derived from the stage
/// sizes; widths given explicitly are kept as written and checked by validate().
NetworkConfig network_config_from_json(const nlohmann::json& j, const NetworkConfig& base);
TrainConfig train_config_from_json(const nlohmann::json& j, const TrainConfig& base);
AugmentConfig augment_config_from_json(const nlohmann::json& j, const AugmentConfig& base);
PartConstants part_constants_from_json(const nlohmann::json& j, const PartConstants& base);

NetworkConfig network_preset(std::string_view name);

}  // namespace spil
