// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/config_json.hpp"

#include <initializer_list>
#include <string>

#include "spil/error.hpp"

namespace spil {

using nlohmann::json;

namespace {

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
}

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& where) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (std::string_view a : allowed) known = known || key == a;
    if (!known) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t>) {
      if (!it->is_number_unsigned() && !(it->is_number_integer() && it->template get<std::int64_t>() >= 0)) {
        throw ConfigError(where + "." + key + ": expected a non-negative integer");
      }
      out = it->template get<T>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw ConfigError(where + "." + key + ": expected a number");
      out = it->template get<double>();
    } else if constexpr (std::is_same_v<T, bool>) {
      if (!it->is_boolean()) throw ConfigError(where + "." + key + ": expected true or false");
      out = it->template get<bool>();
    } else {
      out = it->template get<T>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

std::string read_string(const json& j, const char* key, const std::string& fallback, const std::string& where) {
  auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_string()) throw ConfigError(where + "." + key + ": expected a string");
  return it->get<std::string>();
}

json local_to_json(const LocalSpilConfig& c) {
  return json{{"in_dim", c.in_dim},         {"embed_dim", c.embed_dim},   {"head_out_dim", c.head_out_dim},
              {"num_heads", c.num_heads},   {"variant", to_string(c.variant)}, {"mask_d", c.mask_d},
              {"pos_hidden", c.pos_hidden}, {"pos_layers", c.pos_layers}};
}

json global_to_json(const GlobalSpilConfig& c) {
  return json{{"dim", c.dim},
              {"n_points", c.n_points},
              {"use_z", c.use_z},
              {"use_position", c.use_position},
              {"use_residual", c.use_residual}};
}

}  // namespace

json to_json(const NetworkConfig& cfg) {
  json stages = json::array();
  for (const StageConfig& s : cfg.stages) {
    stages.push_back(json{{"n_centroids", s.n_centroids},
                          {"k_neighbors", s.k_neighbors},
                          {"radius_factor", s.radius_factor},
                          {"use_global", s.use_global},
                          {"local", local_to_json(s.local)},
                          {"global", global_to_json(s.global)}});
  }
  return json{{"input_points", cfg.input_points},
              {"t_frame", cfg.t_frame},
              {"classifier_hidden", cfg.classifier_hidden},
              {"dropout_rate", cfg.dropout_rate},
              {"num_classes", cfg.num_classes},
              {"initial_features", to_string(cfg.initial_features)},
              {"stages", stages}};
}

json to_json(const AugmentConfig& cfg) {
  return json{{"enabled", cfg.enabled}, {"jitter_sigma", cfg.jitter_sigma}, {"rotate_max", cfg.rotate_max}};
}

json to_json(const TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"momentum", cfg.momentum},
              {"seed", cfg.seed},
              {"threads", cfg.threads},
              {"augment", to_json(cfg.augment)}};
}

json to_json(const PartConstants& parts) {
  return json{{"head", parts.head}, {"hands", parts.hands}, {"feet", parts.feet}, {"body", parts.body}};
}

NetworkConfig network_preset(std::string_view name) {
  if (name == "full") return NetworkConfig::defaults();
  if (name == "desk") return NetworkConfig::desk();
  if (name == "micro") return NetworkConfig::micro();
  throw ConfigError("unknown network preset '" + std::string(name) + "' (expected full|desk|micro)");
}

NetworkConfig network_config_from_json(const json& j, const NetworkConfig& base) {
  const std::string where = "network";
  check_keys(j,
             {"preset", "input_points", "t_frame", "classifier_hidden", "dropout_rate", "num_classes",
              "initial_features", "stages"},
             where);
  NetworkConfig cfg = j.contains("preset") ? network_preset(read_string(j, "preset", "", where)) : base;
  read(j, "input_points", cfg.input_points, where);
  read(j, "t_frame", cfg.t_frame, where);
  read(j, "classifier_hidden", cfg.classifier_hidden, where);
  read(j, "dropout_rate", cfg.dropout_rate, where);
  read(j, "num_classes", cfg.num_classes, where);
  if (j.contains("initial_features")) {
    try {
      cfg.initial_features = parse_initial_features(read_string(j, "initial_features", "", where));
    } catch (const ConfigError& e) {
      throw ConfigError(where + ".initial_features: " + e.what());
    }
  }

  // Which derived widths were written explicitly, per stage.
  struct Explicit {
    bool in_dim = false;
    bool dim = false;
    bool n_points = false;
  };
  std::vector<Explicit> explicit_widths(cfg.stages.size());

  if (j.contains("stages")) {
    const json& arr = j.at("stages");
    if (!arr.is_array() || arr.empty()) throw ConfigError(where + ".stages: expected a non-empty array");
    std::vector<StageConfig> stages;
    explicit_widths.assign(arr.size(), Explicit{});
    for (std::size_t s = 0; s < arr.size(); ++s) {
      const std::string sw = where + ".stages[" + std::to_string(s) + "]";
      const json& js = arr[s];
      check_keys(js, {"n_centroids", "k_neighbors", "radius_factor", "use_global", "local", "global"}, sw);
      StageConfig st = s < cfg.stages.size() ? cfg.stages[s] : StageConfig{};
      read(js, "n_centroids", st.n_centroids, sw);
      read(js, "k_neighbors", st.k_neighbors, sw);
      read(js, "radius_factor", st.radius_factor, sw);
      read(js, "use_global", st.use_global, sw);
      if (js.contains("local")) {
        const json& jl = js.at("local");
        const std::string lw = sw + ".local";
        check_keys(jl,
                   {"in_dim", "embed_dim", "head_out_dim", "num_heads", "variant", "mask_d", "pos_hidden",
                    "pos_layers"},
                   lw);
        read(jl, "in_dim", st.local.in_dim, lw);
        explicit_widths[s].in_dim = jl.contains("in_dim");
        read(jl, "embed_dim", st.local.embed_dim, lw);
        read(jl, "head_out_dim", st.local.head_out_dim, lw);
        read(jl, "num_heads", st.local.num_heads, lw);
        if (jl.contains("variant")) {
          try {
            st.local.variant = parse_position_variant(read_string(jl, "variant", "", lw));
          } catch (const Error& e) {
            throw ConfigError(lw + ".variant: " + e.what());
          }
        }
        read(jl, "mask_d", st.local.mask_d, lw);
        read(jl, "pos_hidden", st.local.pos_hidden, lw);
        read(jl, "pos_layers", st.local.pos_layers, lw);
      }
      if (js.contains("global")) {
        const json& jg = js.at("global");
        const std::string gw = sw + ".global";
        check_keys(jg, {"dim", "n_points", "use_z", "use_position", "use_residual"}, gw);
        read(jg, "dim", st.global.dim, gw);
        explicit_widths[s].dim = jg.contains("dim");
        read(jg, "n_points", st.global.n_points, gw);
        explicit_widths[s].n_points = jg.contains("n_points");
        read(jg, "use_z", st.global.use_z, gw);
        read(jg, "use_position", st.global.use_position, gw);
        read(jg, "use_residual", st.global.use_residual, gw);
      }
      stages.push_back(st);
    }
    cfg.stages = std::move(stages);
  }

  NetworkConfig derived = cfg;
  derived.rechain();
  for (std::size_t s = 0; s < cfg.stages.size(); ++s) {
    if (!explicit_widths[s].in_dim) cfg.stages[s].local.in_dim = derived.stages[s].local.in_dim;
    if (!explicit_widths[s].dim) cfg.stages[s].global.dim = derived.stages[s].global.dim;
    if (!explicit_widths[s].n_points) cfg.stages[s].global.n_points = derived.stages[s].global.n_points;
  }
  return cfg;
}

AugmentConfig augment_config_from_json(const json& j, const AugmentConfig& base) {
  const std::string where = "train.augment";
  check_keys(j, {"enabled", "jitter_sigma", "rotate_max"}, where);
  AugmentConfig cfg = base;
  read(j, "enabled", cfg.enabled, where);
  read(j, "jitter_sigma", cfg.jitter_sigma, where);
  read(j, "rotate_max", cfg.rotate_max, where);
  return cfg;
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& base) {
  const std::string where = "train";
  check_keys(j, {"epochs", "batch_size", "learning_rate", "momentum", "seed", "threads", "augment"}, where);
  TrainConfig cfg = base;
  read(j, "epochs", cfg.epochs, where);
  read(j, "batch_size", cfg.batch_size, where);
  read(j, "learning_rate", cfg.learning_rate, where);
  read(j, "momentum", cfg.momentum, where);
  read(j, "seed", cfg.seed, where);
  read(j, "threads", cfg.threads, where);
  if (j.contains("augment")) cfg.augment = augment_config_from_json(j.at("augment"), cfg.augment);
  return cfg;
}

PartConstants part_constants_from_json(const json& j, const PartConstants& base) {
  const std::string where = "parts";
  check_keys(j, {"head", "hands", "feet", "body"}, where);
  PartConstants parts = base;
  read(j, "head", parts.head, where);
  read(j, "hands", parts.hands, where);
  read(j, "feet", parts.feet, where);
  read(j, "body", parts.body, where);
  return parts;
}

}  // namespace spil
