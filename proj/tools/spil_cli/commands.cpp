// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil_cli/commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "spil/checkpoint.hpp"
#include "spil/error.hpp"
#include "spil/network.hpp"
#include "spil/training.hpp"

namespace spil::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kInitStream = 0x1417;

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// Flags shared by commands that resolve a RunConfig.
struct ConfigFlags {
  std::string config;
  std::string data;
  std::string val_data;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> variant;
  std::optional<std::size_t> heads;
  std::optional<double> mask_d;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> threads;
  std::optional<std::string> initial_features;

  void attach(CLI::App* app) {
    app->add_option("--config", config, "JSON run config");
    app->add_option("--data", data, "pose or point-cloud JSON-lines file");
    app->add_option("--val-data", val_data, "held-out JSON-lines file");
    app->add_option("--seed", seed, "seed for initialization, sampling, augmentation and batch order");
    app->add_option("--variant", variant, "Local-SPIL position term")
        ->check(CLI::IsMember({"spacing", "spanning", "masking"}));
    app->add_option("--heads", heads, "heads per Local-SPIL stage")->check(CLI::PositiveNumber);
    app->add_option("--mask-d", mask_d, "Masking distance threshold d")->check(CLI::PositiveNumber);
    app->add_option("--epochs", epochs, "training epochs")->check(CLI::PositiveNumber);
    app->add_option("--threads", threads, "worker threads (0 = all cores)");
    app->add_option("--initial-features", initial_features, "stage-1 point features")
        ->check(CLI::IsMember({"confidence", "parts", "both"}));
    app->allow_extras();
    app->footer("Any config leaf can be overridden with --<dotted.path> VALUE, e.g. --train.learning_rate 0.01 "
                "or --network.stages.*.k_neighbors 16. --network.preset full|desk|micro selects a base network.");
  }

  std::vector<Override> overrides(const CLI::App* app) const {
    std::vector<Override> out;
    if (seed) out.emplace_back("train.seed", std::to_string(*seed));
    if (epochs) out.emplace_back("train.epochs", std::to_string(*epochs));
    if (threads) out.emplace_back("train.threads", std::to_string(*threads));
    if (!data.empty()) out.emplace_back("data.train", json(data).dump());
    if (!val_data.empty()) out.emplace_back("data.val", json(val_data).dump());
    // Generic overrides come from the unparsed arguments, applied in order; a
    // preset must land before the per-field flags below.
    std::vector<Override> generic;
    const std::vector<std::string> rest = app->remaining();
    for (std::size_t i = 0; i < rest.size(); ++i) {
      const std::string& arg = rest[i];
      if (arg.rfind("--", 0) != 0 || arg.size() <= 2) throw UsageError("unexpected argument '" + arg + "'");
      const std::string body = arg.substr(2);
      const auto eq = body.find('=');
      if (eq != std::string::npos) {
        generic.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      } else {
        if (i + 1 >= rest.size()) throw UsageError("override " + arg + " needs a value");
        generic.emplace_back(body, rest[++i]);
      }
    }
    std::stable_partition(generic.begin(), generic.end(), [](const Override& o) { return o.first == "network.preset"; });
    out.insert(out.end(), generic.begin(), generic.end());
    if (initial_features) out.emplace_back("network.initial_features", json(*initial_features).dump());
    if (variant) out.emplace_back("network.stages.*.local.variant", json(*variant).dump());
    if (heads) out.emplace_back("network.stages.*.local.num_heads", std::to_string(*heads));
    if (mask_d) out.emplace_back("network.stages.*.local.mask_d", json(*mask_d).dump());
    return out;
  }

  RunConfig resolve(const CLI::App* app, const std::vector<Override>& extra = {}) const {
    std::vector<Override> all = overrides(app);
    all.insert(all.end(), extra.begin(), extra.end());
    return load_run_config(config.empty() ? std::nullopt : std::optional<fs::path>(config), all);
  }
};

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write " + file.string());
  out << text;
  if (!out) throw IoError("failed writing " + file.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

json metrics_json(const Metrics& m) {
  return json{{"epoch", m.epoch},
              {"train_loss", m.train_loss},
              {"train_acc", m.train_acc},
              {"val_acc", m.val_acc ? json(*m.val_acc) : json(nullptr)}};
}

std::vector<SkeletonPointCloud> load_required(const std::string& path, const RunConfig& rc, const char* flag) {
  if (path.empty()) throw UsageError(std::string(flag) + " is required");
  return load_clouds(path, rc.parts, rc.data.conf_threshold);
}

struct TrainOutcome {
  Network net;
  std::vector<Metrics> metrics;
};

TrainOutcome train_run(const RunConfig& rc, const std::vector<SkeletonPointCloud>& train_set,
                       const std::vector<SkeletonPointCloud>* val_set, const std::function<void(const Metrics&)>& hook) {
  Network net = Network::build(rc.network, derive_seed(rc.train.seed, kInitStream));
  TrainOptions opts;
  opts.validation = val_set;
  opts.on_epoch = hook;
  std::vector<Metrics> metrics = train(net, train_set, rc.train, opts);
  return {std::move(net), std::move(metrics)};
}

// --- commands ---

int cmd_synth(const fs::path& out_path, std::size_t n, std::uint64_t seed, const SynthOptions& opts, std::ostream& out) {
  if (n == 0) throw UsageError("--n must be positive");
  if (n < 2) throw UsageError("--n must be at least 2 for a balanced set");
  const auto seqs = generate_synthetic(n, seed, opts);
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  write_pose_file(out_path, seqs);
  out << "wrote " << seqs.size() << " sequences to " << out_path.string() << '\n';
  return kOk;
}

int cmd_convert(const ConfigFlags& flags, const CLI::App* app, const fs::path& out_path, std::ostream& out) {
  const RunConfig rc = flags.resolve(app);
  const auto clouds = load_required(rc.data.train, rc, "--data");
  if (out_path.empty()) throw UsageError("--out is required");
  if (out_path.has_parent_path()) ensure_dir(out_path.parent_path());
  std::ostringstream text;
  for (const auto& c : clouds) text << cloud_to_json(c).dump() << '\n';
  write_text(out_path, text.str());
  out << "wrote " << clouds.size() << " point clouds to " << out_path.string() << '\n';
  return kOk;
}

int cmd_train(const ConfigFlags& flags, const CLI::App* app, const fs::path& out_dir, std::ostream& out) {
  if (out_dir.empty()) throw UsageError("--out is required");
  const RunConfig rc = flags.resolve(app);
  const auto train_set = load_required(rc.data.train, rc, "--data");
  std::vector<SkeletonPointCloud> val_set;
  if (!rc.data.val.empty()) val_set = load_clouds(rc.data.val, rc.parts, rc.data.conf_threshold);

  ensure_dir(out_dir);
  save_run_config(rc, out_dir / "config.json");
  std::ofstream metrics_file(out_dir / "metrics.jsonl", std::ios::binary);
  std::ofstream timing_file(out_dir / "timing.jsonl", std::ios::binary);
  if (!metrics_file || !timing_file) throw IoError("cannot write metrics into " + out_dir.string());

  auto outcome = train_run(rc, train_set, val_set.empty() ? nullptr : &val_set, [&](const Metrics& m) {
    metrics_file << metrics_json(m).dump() << '\n';
    metrics_file.flush();
    timing_file << json{{"epoch", m.epoch}, {"wall_seconds", m.wall_seconds}}.dump() << '\n';
    out << "epoch " << m.epoch << "  loss " << fixed4(m.train_loss) << "  train_acc " << fixed4(m.train_acc);
    if (m.val_acc) out << "  val_acc " << fixed4(*m.val_acc);
    out << '\n';
  });
  if (!metrics_file) throw IoError("failed writing metrics.jsonl");
  save_checkpoint(make_checkpoint(outcome.net), out_dir / "checkpoint");
  out << "checkpoint written to " << (out_dir / "checkpoint").string() << '\n';
  return kOk;
}

int cmd_eval(const ConfigFlags& flags, const CLI::App* app, const fs::path& ckpt_dir, const fs::path& out_dir,
             std::ostream& out) {
  if (ckpt_dir.empty()) throw UsageError("--checkpoint is required");
  const RunConfig rc = flags.resolve(app);
  const auto data = load_required(rc.data.train, rc, "--data");
  const Network net = network_from_checkpoint(load_checkpoint(ckpt_dir));
  const EvalReport report = evaluate(net, data, EvalOptions{.seed = rc.train.seed, .threads = rc.train.threads});

  const fs::path report_dir = out_dir.empty() ? ckpt_dir : out_dir;
  ensure_dir(report_dir);
  const json j{{"accuracy", report.accuracy},
               {"n_samples", report.n_samples},
               {"per_class_acc", report.per_class_acc},
               {"per_class_count", report.per_class_count}};
  write_text(report_dir / "report.json", j.dump(2) + "\n");
  out << "accuracy: " << fixed4(report.accuracy) << '\n';
  return kOk;
}

int cmd_inspect(const ConfigFlags& flags, const CLI::App* app, const fs::path& ckpt_dir, const fs::path& out_path,
                std::size_t layer, std::size_t top_k, std::ostream& out) {
  if (ckpt_dir.empty()) throw UsageError("--checkpoint is required");
  if (top_k == 0) throw UsageError("--top-k must be positive");
  const RunConfig rc = flags.resolve(app);
  const auto data = load_required(rc.data.train, rc, "--data");
  const Network net = network_from_checkpoint(load_checkpoint(ckpt_dir));
  if (layer >= net.config().stages.size()) {
    throw ConfigError("--layer " + std::to_string(layer) + " is out of range (network has " +
                      std::to_string(net.config().stages.size()) + " stages)");
  }

  // Same resampling as evaluate() uses for sample 0.
  NoGradGuard no_grad;
  Rng rng(derive_seed(rc.train.seed, 0, 1));
  const PointSetInput input = prepare_input(data.front(), net.config(), rng);
  ForwardTrace trace;
  net.forward(input, ForwardOptions{}, &trace);
  const StageTrace& st = trace.stages.at(layer);

  json centroids = json::array();
  for (std::size_t c = 0; c < st.neighborhoods.size(); ++c) {
    const Neighborhood& nb = st.neighborhoods[c];
    const std::size_t k = nb.size();
    const auto& w = st.local.mean_weights.at(c);
    // Row 0 belongs to the centroid itself (ball query puts it first).
    std::vector<std::size_t> order(k);
    for (std::size_t j = 0; j < k; ++j) order[j] = j;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    json neighbors = json::array();
    for (std::size_t r = 0; r < std::min(top_k, k); ++r) {
      const std::size_t j = order[r];
      neighbors.push_back(json{{"coords", nb.member_coords[j]}, {"weight", w[j]}, {"index", nb.member_indices[j]}});
    }
    centroids.push_back(json{{"centroid", st.centroids.coords[c]}, {"neighbors", neighbors}});
  }
  const json dump{{"layer", layer}, {"top_k", top_k}, {"label", data.front().label}, {"centroids", centroids}};

  fs::path file = out_path.empty() ? ckpt_dir / "weights.json" : out_path;
  if (file.extension() != ".json") file /= "weights.json";
  if (file.has_parent_path()) ensure_dir(file.parent_path());
  write_text(file, dump.dump(2) + "\n");
  out << "wrote " << st.neighborhoods.size() << " centroids to " << file.string() << '\n';
  return kOk;
}

int cmd_ablate(const ConfigFlags& flags, const CLI::App* app, const fs::path& out_dir, const std::string& tables,
               std::ostream& out) {
  if (out_dir.empty()) throw UsageError("--out is required");
  const RunConfig base = flags.resolve(app);
  const auto train_set = load_required(base.data.train, base, "--data");
  std::vector<SkeletonPointCloud> val_set;
  if (!base.data.val.empty()) val_set = load_clouds(base.data.val, base.parts, base.data.conf_threshold);

  std::vector<std::string> wanted;
  std::stringstream ss(tables);
  for (std::string t; std::getline(ss, t, ',');) {
    if (!t.empty()) wanted.push_back(t);
  }
  const auto matrix = ablation_matrix();
  for (const auto& t : wanted) {
    const bool known = std::any_of(matrix.begin(), matrix.end(), [&](const AblationRow& r) { return r.table == t; });
    if (!known) throw UsageError("unknown ablation table '" + t + "'");
  }

  ensure_dir(out_dir);
  save_run_config(base, out_dir / "config.json");
  std::ofstream lines(out_dir / "ablation.jsonl", std::ios::binary);
  if (!lines) throw IoError("cannot write ablation.jsonl");
  for (const AblationRow& row : matrix) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), row.table) == wanted.end()) continue;
    const RunConfig rc = flags.resolve(app, row.overrides);
    auto outcome = train_run(rc, train_set, nullptr, {});
    const auto& eval_set = val_set.empty() ? train_set : val_set;
    const EvalReport report = evaluate(outcome.net, eval_set, EvalOptions{.seed = rc.train.seed, .threads = rc.train.threads});
    json overrides = json::object();
    for (const auto& [k, v] : row.overrides) overrides[k] = json::parse(v);
    const Metrics& last = outcome.metrics.back();
    const json line{{"table", row.table},
                    {"row", row.row},
                    {"overrides", overrides},
                    {"train_loss", last.train_loss},
                    {"train_acc", last.train_acc},
                    {"eval_on", val_set.empty() ? "train" : "val"},
                    {"accuracy", report.accuracy}};
    lines << line.dump() << '\n';
    lines.flush();
    out << row.table << " / " << row.row << ": accuracy " << fixed4(report.accuracy) << '\n';
  }
  return kOk;
}

}  // namespace

std::vector<SkeletonPointCloud> load_clouds(const fs::path& path, const PartConstants& parts, double conf_threshold) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  std::string line;
  std::size_t line_no = 0;
  std::vector<SkeletonPointCloud> clouds;
  bool poses = false;
  std::vector<PoseSequence> seqs;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(e.what(), line_no);
    }
    if (clouds.empty() && seqs.empty()) poses = j.is_object() && j.contains("frames");
    if (poses) {
      seqs.push_back(pose_from_json(j, line_no));
    } else {
      clouds.push_back(cloud_from_json(j, line_no));
    }
  }
  for (const auto& s : seqs) clouds.push_back(build_point_cloud(s, parts, conf_threshold));
  if (clouds.empty()) throw ValidationError(path.string() + " holds no samples");
  return clouds;
}

std::vector<AblationRow> ablation_matrix() {
  std::vector<AblationRow> rows;
  const auto str = [](const std::string& s) { return json(s).dump(); };
  for (const char* variant : {"spacing", "spanning", "masking"}) {
    for (bool global : {false, true}) {
      rows.push_back({"interaction",
                      std::string(variant) + (global ? "+global" : ""),
                      {{"network.stages.*.local.variant", str(variant)},
                       {"network.stages.*.use_global", global ? "true" : "false"},
                       {"network.stages.*.local.num_heads", "1"},
                       {"network.stages.*.local.mask_d", "0.02"}}});
    }
  }
  for (int heads : {1, 2, 4, 8, 16}) {
    rows.push_back({"heads", "H=" + std::to_string(heads), {{"network.stages.*.local.num_heads", std::to_string(heads)}}});
  }
  for (const char* d : {"0.01", "0.02", "0.04", "0.08"}) {
    rows.push_back({"mask_d", std::string("d=") + d, {{"network.stages.*.local.mask_d", d}}});
  }
  for (const char* f : {"confidence", "parts", "both"}) {
    rows.push_back({"initial_features", f, {{"network.initial_features", str(f)}}});
  }
  struct Composition {
    const char* name;
    bool z, position, residual;
  };
  for (const Composition& c : {Composition{"attention", false, false, false}, Composition{"+Z", true, false, false},
                               Composition{"+position", false, true, false}, Composition{"+Z+position", true, true, false},
                               Composition{"+Z+position+residual", true, true, true}}) {
    rows.push_back({"attention",
                    c.name,
                    {{"network.stages.*.global.use_z", c.z ? "true" : "false"},
                     {"network.stages.*.global.use_position", c.position ? "true" : "false"},
                     {"network.stages.*.global.use_residual", c.residual ? "true" : "false"}}});
  }
  return rows;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Skeleton points interaction learning for violence recognition", "spil"};
  app.require_subcommand(1);

  fs::path out_path;
  std::size_t n = 0;
  std::uint64_t synth_seed = 0;
  SynthOptions synth_opts;
  auto* synth = app.add_subcommand("synth", "write a balanced synthetic pose set");
  synth->add_option("--out", out_path, "output JSON-lines file")->required();
  synth->add_option("--n", n, "number of sequences")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--frames", synth_opts.frames, "frames per sequence")->check(CLI::PositiveNumber);
  synth->add_option("--persons", synth_opts.persons, "people per frame")->check(CLI::PositiveNumber);

  ConfigFlags convert_flags;
  auto* convert = app.add_subcommand("convert", "turn a pose file into point-cloud JSON-lines");
  convert_flags.attach(convert);
  convert->add_option("--out", out_path, "output JSON-lines file");

  ConfigFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "train a model; writes config.json, metrics.jsonl and checkpoint/");
  train_flags.attach(train_cmd);
  train_cmd->add_option("--out", out_path, "output directory");

  ConfigFlags eval_flags;
  fs::path ckpt;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint; prints accuracy and writes report.json");
  eval_flags.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", ckpt, "checkpoint directory");
  eval_cmd->add_option("--out", out_path, "directory for report.json (default: the checkpoint directory)");

  ConfigFlags inspect_flags;
  std::size_t layer = 0;
  std::size_t top_k = 10;
  auto* inspect = app.add_subcommand("inspect", "dump the top-k interaction weights per centroid of one stage");
  inspect_flags.attach(inspect);
  inspect->add_option("--checkpoint", ckpt, "checkpoint directory");
  inspect->add_option("--layer", layer, "stage index, 0-based");
  inspect->add_option("--top-k", top_k, "neighbors kept per centroid");
  inspect->add_option("--out", out_path, "weights.json path or directory");

  ConfigFlags ablate_flags;
  std::string tables;
  auto* ablate = app.add_subcommand("ablate", "train and evaluate every row of the ablation matrix");
  ablate_flags.attach(ablate);
  ablate->add_option("--out", out_path, "output directory for ablation.jsonl");
  ablate->add_option("--tables", tables, "comma list of interaction,heads,mask_d,initial_features,attention");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "spil: " << e.what() << '\n';
    return kUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(out_path, n, synth_seed, synth_opts, out);
    if (convert->parsed()) return cmd_convert(convert_flags, convert, out_path, out);
    if (train_cmd->parsed()) return cmd_train(train_flags, train_cmd, out_path, out);
    if (eval_cmd->parsed()) return cmd_eval(eval_flags, eval_cmd, ckpt, out_path, out);
    if (inspect->parsed()) return cmd_inspect(inspect_flags, inspect, ckpt, out_path, layer, top_k, out);
    if (ablate->parsed()) return cmd_ablate(ablate_flags, ablate, out_path, tables, out);
  } catch (const UsageError& e) {
    err << "spil: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "spil: " << e.what() << '\n';
    return kDataError;
  } catch (const std::exception& e) {
    err << "spil: internal error: " << e.what() << '\n';
    return kInternal;
  }
  err << "spil: no command given\n";
  return kUsage;
}

}  // namespace spil::cli
