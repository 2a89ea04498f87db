// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "spil_cli/commands.hpp"
#include "support.hpp"

namespace spil {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result spil(std::vector<std::string> args) {
  args.insert(args.begin(), "spil");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<json> read_lines(const fs::path& p) {
  std::vector<json> out;
  std::ifstream in(p);
  for (std::string line; std::getline(in, line);) out.push_back(json::parse(line));
  return out;
}

TEST(CliSynth, BalancedAndReproducible) {
  const auto dir = testing::temp_dir("cli_synth");
  const Result r = spil({"synth", "--out", (dir / "a.jsonl").string(), "--n", "64", "--seed", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = read_lines(dir / "a.jsonl");
  ASSERT_EQ(lines.size(), 64u);
  int ones = 0;
  for (const auto& l : lines) ones += l.at("label").get<int>();
  EXPECT_EQ(ones, 32);

  ASSERT_EQ(spil({"synth", "--out", (dir / "b.jsonl").string(), "--n", "64", "--seed", "1"}).code, 0);
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
}

TEST(CliSynth, ZeroSamplesIsUsageError) {
  const auto dir = testing::temp_dir("cli_synth_zero");
  EXPECT_EQ(spil({"synth", "--out", (dir / "a.jsonl").string(), "--n", "0"}).code, cli::kUsage);
  EXPECT_EQ(spil({"synth", "--n", "4"}).code, cli::kUsage);
  EXPECT_EQ(spil({"frobnicate"}).code, cli::kUsage);
}

TEST(CliConvert, WritesPointClouds) {
  const auto dir = testing::temp_dir("cli_convert");
  ASSERT_EQ(spil({"synth", "--out", (dir / "p.jsonl").string(), "--n", "4"}).code, 0);
  const Result r = spil({"convert", "--data", (dir / "p.jsonl").string(), "--out", (dir / "c.jsonl").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = read_lines(dir / "c.jsonl");
  ASSERT_EQ(lines.size(), 4u);
  EXPECT_NO_THROW(cloud_from_json(lines[0]));
  // Converted clouds load back as training input.
  EXPECT_EQ(cli::load_clouds(dir / "c.jsonl", {}, 0.05).size(), 4u);
}

class CliTrained : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = testing::temp_dir("cli_trained");
    ASSERT_EQ(spil({"synth", "--out", (dir_ / "train.jsonl").string(), "--n", "8", "--seed", "2"}).code, 0);
    const Result r = spil({"train", "--data", (dir_ / "train.jsonl").string(), "--out", (dir_ / "run").string(),
                           "--network.preset", "micro", "--epochs", "2", "--train.batch_size", "4", "--seed", "5"});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static fs::path dir_;
};
fs::path CliTrained::dir_;

TEST_F(CliTrained, MetricsOnePerEpoch) {
  const auto metrics = read_lines(dir_ / "run" / "metrics.jsonl");
  ASSERT_EQ(metrics.size(), 2u);
  EXPECT_EQ(metrics[1].at("epoch"), 2);
  EXPECT_TRUE(metrics[0].contains("train_loss"));
  EXPECT_FALSE(metrics[0].contains("wall_seconds"));
  EXPECT_EQ(read_lines(dir_ / "run" / "timing.jsonl").size(), 2u);
}

TEST_F(CliTrained, EchoedConfigReloadsIdentically) {
  const auto reloaded = cli::load_run_config(dir_ / "run" / "config.json", {});
  EXPECT_EQ(cli::to_json(reloaded), json::parse(slurp(dir_ / "run" / "config.json")));
  EXPECT_EQ(reloaded.train.epochs, 2u);
  EXPECT_EQ(reloaded.network.input_points, 16u);
}

TEST_F(CliTrained, EvalWritesReport) {
  const Result r = spil({"eval", "--checkpoint", (dir_ / "run" / "checkpoint").string(), "--data",
                         (dir_ / "train.jsonl").string(), "--out", (dir_ / "eval").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out.rfind("accuracy: ", 0), 0u) << r.out;
  const json report = json::parse(slurp(dir_ / "eval" / "report.json"));
  EXPECT_EQ(report.at("n_samples"), 8);
  const double acc = report.at("accuracy");
  EXPECT_GE(acc, 0.0);
  EXPECT_LE(acc, 1.0);
  // Twice gives the same accuracy line.
  EXPECT_EQ(spil({"eval", "--checkpoint", (dir_ / "run" / "checkpoint").string(), "--data",
                  (dir_ / "train.jsonl").string(), "--out", (dir_ / "eval2").string()})
                .out,
            r.out);
}

TEST_F(CliTrained, InspectTopKWeights) {
  const std::string ckpt = (dir_ / "run" / "checkpoint").string();
  const std::string data = (dir_ / "train.jsonl").string();
  Result r = spil({"inspect", "--checkpoint", ckpt, "--data", data, "--top-k", "2", "--out",
                   (dir_ / "top2.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  json dump = json::parse(slurp(dir_ / "top2.json"));
  ASSERT_FALSE(dump.at("centroids").empty());
  for (const auto& c : dump.at("centroids")) {
    const auto& nbs = c.at("neighbors");
    ASSERT_LE(nbs.size(), 2u);
    double sum = 0.0;
    for (std::size_t i = 0; i < nbs.size(); ++i) {
      sum += nbs[i].at("weight").get<double>();
      if (i > 0) EXPECT_GE(nbs[i - 1].at("weight").get<double>(), nbs[i].at("weight").get<double>());
    }
    EXPECT_LE(sum, 1.0 + 1e-6);
  }

  const std::size_t k = NetworkConfig::micro().stages[0].k_neighbors;
  r = spil({"inspect", "--checkpoint", ckpt, "--data", data, "--top-k", std::to_string(k), "--out",
            (dir_ / "full").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  dump = json::parse(slurp(dir_ / "full" / "weights.json"));
  for (const auto& c : dump.at("centroids")) {
    double sum = 0.0;
    for (const auto& nb : c.at("neighbors")) sum += nb.at("weight").get<double>();
    EXPECT_NEAR(sum, 1.0, 1e-6);
  }

  EXPECT_EQ(spil({"inspect", "--checkpoint", ckpt, "--data", data, "--layer", "3"}).code, cli::kDataError);
}

TEST_F(CliTrained, CorruptedCheckpointFails) {
  const fs::path copy = testing::temp_dir("cli_corrupt") / "checkpoint";
  fs::copy(dir_ / "run" / "checkpoint", copy, fs::copy_options::recursive);
  fs::resize_file(copy / "params.bin", 8);
  const Result r =
      spil({"eval", "--checkpoint", copy.string(), "--data", (dir_ / "train.jsonl").string()});
  EXPECT_NE(r.code, 0);
  EXPECT_NE(r.err.find("params.bin"), std::string::npos) << r.err;
}

TEST(CliTrain, BadInputsReportErrors) {
  const auto dir = testing::temp_dir("cli_bad");
  EXPECT_EQ(spil({"train", "--out", (dir / "x").string(), "--network.preset", "micro"}).code, cli::kUsage);
  EXPECT_EQ(spil({"train", "--data", (dir / "missing.jsonl").string(), "--out", (dir / "x").string()}).code,
            cli::kDataError);
  std::ofstream(dir / "bad.jsonl") << "{\"video_id\": 3}\n";
  EXPECT_EQ(spil({"train", "--data", (dir / "bad.jsonl").string(), "--out", (dir / "x").string()}).code,
            cli::kDataError);
  EXPECT_EQ(spil({"train", "--data", (dir / "bad.jsonl").string(), "--out", (dir / "x").string(), "--variant",
                  "sideways"})
                .code,
            cli::kUsage);
}

TEST(CliAblate, MatrixCoversTables) {
  const auto rows = cli::ablation_matrix();
  std::set<std::string> tables;
  for (const auto& r : rows) tables.insert(r.table);
  EXPECT_EQ(tables, (std::set<std::string>{"interaction", "heads", "mask_d", "initial_features", "attention"}));
  std::size_t heads = 0;
  for (const auto& r : rows) heads += r.table == "heads";
  EXPECT_EQ(heads, 5u);
}

TEST(CliAblate, RunsOneTable) {
  const auto dir = testing::temp_dir("cli_ablate");
  ASSERT_EQ(spil({"synth", "--out", (dir / "d.jsonl").string(), "--n", "4"}).code, 0);
  const Result r = spil({"ablate", "--data", (dir / "d.jsonl").string(), "--out", (dir / "abl").string(), "--tables",
                         "mask_d", "--network.preset", "micro", "--epochs", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto lines = read_lines(dir / "abl" / "ablation.jsonl");
  EXPECT_EQ(lines.size(), 4u);
  for (const auto& l : lines) EXPECT_EQ(l.at("table"), "mask_d");
}

}  // namespace
}  // namespace spil
