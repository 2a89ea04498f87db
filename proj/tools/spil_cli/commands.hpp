// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "spil/pose.hpp"
#include "spil_cli/run_config.hpp"

namespace spil::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

/// Entry point shared by the spil binary and the tests. argv[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Loads a JSON-lines file of either pose sequences or converted point clouds.
std::vector<SkeletonPointCloud> load_clouds(const std::filesystem::path& path, const PartConstants& parts,
                                            double conf_threshold);

struct AblationRow {
  std::string table;
  std::string row;
  std::vector<Override> overrides;
};

/// Interaction strategy x Global-SPIL, head counts, mask thresholds, initial
/// features and attention composition, each varied from the base config.
std::vector<AblationRow> ablation_matrix();

}  // namespace spil::cli
