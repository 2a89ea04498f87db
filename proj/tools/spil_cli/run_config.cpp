// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil_cli/run_config.hpp"

#include <fstream>
#include <sstream>

#include "spil/config_json.hpp"
#include "spil/error.hpp"

namespace spil::cli {

using nlohmann::json;

namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path);
  std::string item;
  while (std::getline(ss, item, '.')) {
    if (item.empty()) throw ConfigError("malformed override key '" + path + "'");
    parts.push_back(item);
  }
  if (parts.empty()) throw ConfigError("empty override key");
  return parts;
}

json parse_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception&) {
    return text;
  }
}

bool is_derived_width(const std::string& key) { return key == "in_dim" || key == "dim" || key == "n_points"; }

void assign(json& node, const std::vector<std::string>& parts, std::size_t idx, const json& value,
            const std::string& full) {
  const std::string& key = parts[idx];
  const bool last = idx + 1 == parts.size();
  if (node.is_array()) {
    if (key == "*") {
      for (auto& element : node) {
        if (last) {
          element = value;
        } else {
          assign(element, parts, idx + 1, value, full);
        }
      }
      return;
    }
    std::size_t pos = 0;
    std::size_t index = 0;
    try {
      index = std::stoul(key, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != key.size() || index >= node.size()) {
      throw ConfigError("override '" + full + "': '" + key + "' is not a valid index");
    }
    if (last) {
      node[index] = value;
    } else {
      assign(node[index], parts, idx + 1, value, full);
    }
    return;
  }
  if (node.is_null()) node = json::object();
  if (!node.is_object()) throw ConfigError("override '" + full + "': cannot descend into '" + key + "'");
  if (last) {
    node[key] = value;
  } else {
    assign(node[key], parts, idx + 1, value, full);
  }
}

void check_top_keys(const json& j) {
  if (!j.is_object()) throw ConfigError("run config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key != "network" && key != "train" && key != "parts" && key != "data") {
      throw ConfigError("run config: unknown key '" + key + "'");
    }
  }
}

}  // namespace

json to_json(const RunConfig& cfg) {
  return json{{"network", spil::to_json(cfg.network)},
              {"train", spil::to_json(cfg.train)},
              {"parts", spil::to_json(cfg.parts)},
              {"data", json{{"train", cfg.data.train}, {"val", cfg.data.val}, {"conf_threshold", cfg.data.conf_threshold}}}};
}

RunConfig run_config_from_json(const json& j) {
  check_top_keys(j);
  RunConfig cfg;
  if (j.contains("network")) cfg.network = network_config_from_json(j.at("network"), cfg.network);
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"), cfg.train);
  if (j.contains("parts")) cfg.parts = part_constants_from_json(j.at("parts"), cfg.parts);
  if (j.contains("data")) {
    const json& d = j.at("data");
    if (!d.is_object()) throw ConfigError("data: expected a JSON object");
    for (const auto& [key, value] : d.items()) {
      if (key == "train" || key == "val") {
        if (!value.is_string()) throw ConfigError("data." + key + ": expected a string");
        (key == "train" ? cfg.data.train : cfg.data.val) = value.get<std::string>();
      } else if (key == "conf_threshold") {
        if (!value.is_number()) throw ConfigError("data.conf_threshold: expected a number");
        cfg.data.conf_threshold = value.get<double>();
      } else {
        throw ConfigError("data: unknown key '" + key + "'");
      }
    }
  }
  cfg.network.validate();
  cfg.train.validate();
  if (!(cfg.data.conf_threshold >= 0.0 && cfg.data.conf_threshold <= 1.0)) {
    throw ConfigError("data.conf_threshold must lie in [0, 1]");
  }
  return cfg;
}

void apply_overrides(json& doc, const std::vector<Override>& overrides) {
  if (doc.is_null()) doc = json::object();
  for (const auto& [path, text] : overrides) {
    const std::vector<std::string> parts = split_path(path);
    const json value = parse_value(text);
    if (parts.front() == "network") {
      if (parts.size() == 2 && parts[1] == "preset") {
        doc["network"] = json{{"preset", value}};
        continue;
      }
      const json current = doc.contains("network") ? doc.at("network") : json::object();
      json network = spil::to_json(network_config_from_json(current, NetworkConfig::defaults()));
      if (!is_derived_width(parts.back())) {
        for (auto& stage : network.at("stages")) {
          stage.at("local").erase("in_dim");
          stage.at("global").erase("dim");
          stage.at("global").erase("n_points");
        }
      }
      doc["network"] = std::move(network);
    }
    assign(doc, parts, 0, value, path);
  }
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const std::vector<Override>& overrides) {
  json doc = json::object();
  if (path) {
    std::ifstream in(*path);
    if (!in) throw IoError("cannot open config " + path->string());
    try {
      doc = json::parse(in);
    } catch (const json::parse_error& e) {
      throw ParseError(path->string() + ": " + e.what());
    }
  }
  apply_overrides(doc, overrides);
  return run_config_from_json(doc);
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot write " + file.string());
  out << to_json(cfg).dump(2) << '\n';
}

}  // namespace spil::cli
