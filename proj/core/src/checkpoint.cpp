// Copyright 2026 The SPIL Authors
// SPDX-License-Identifier: Apache-2.0

#include "spil/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "spil/config_json.hpp"
#include "spil/error.hpp"

namespace spil {

using nlohmann::json;

namespace {

static_assert(sizeof(double) == 8);

void put_le(std::uint64_t bits, char* out) {
  for (int b = 0; b < 8; ++b) out[b] = static_cast<char>((bits >> (8 * b)) & 0xff);
}

std::uint64_t get_le(const unsigned char* in) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(in[b]) << (8 * b);
  return bits;
}

}  // namespace

ModelCheckpoint make_checkpoint(const Network& net) {
  ModelCheckpoint ckpt;
  ckpt.config = net.config();
  for (const Parameter* p : net.parameters().by_name()) {
    auto values = p->tensor.data();
    ckpt.parameters.push_back({p->name, p->tensor.shape(), std::vector<double>(values.begin(), values.end())});
  }
  return ckpt;
}

Network network_from_checkpoint(const ModelCheckpoint& ckpt) {
  if (ckpt.format_version != kCheckpointFormatVersion) {
    throw IoError("checkpoint format_version " + std::to_string(ckpt.format_version) + " is not supported (expected " +
                  std::to_string(kCheckpointFormatVersion) + ")");
  }
  Network net = Network::build(ckpt.config, 0);
  ParameterSet& params = net.parameters();
  if (params.size() != ckpt.parameters.size()) {
    throw IoError("checkpoint holds " + std::to_string(ckpt.parameters.size()) + " parameters, config expects " +
                  std::to_string(params.size()));
  }
  for (const ParameterRecord& rec : ckpt.parameters) {
    const Parameter* p = params.find(rec.name);
    if (p == nullptr) throw IoError("checkpoint parameter '" + rec.name + "' is not part of the model");
    if (p->tensor.shape() != rec.shape || rec.data.size() != p->tensor.size()) {
      throw IoError("checkpoint parameter '" + rec.name + "' has shape " + shape_to_string(rec.shape) + ", expected " +
                    shape_to_string(p->tensor.shape()));
    }
    Tensor t = p->tensor;
    std::copy(rec.data.begin(), rec.data.end(), t.mutable_data().begin());
  }
  return net;
}

void save_checkpoint(const ModelCheckpoint& ckpt, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  json params = json::array();
  std::size_t total = 0;
  for (const auto& rec : ckpt.parameters) {
    params.push_back(json{{"name", rec.name}, {"shape", rec.shape}});
    total += rec.data.size();
  }
  const json manifest{{"format_version", ckpt.format_version}, {"config", to_json(ckpt.config)}, {"parameters", params}};
  {
    std::ofstream out(dir / "manifest.json", std::ios::binary);
    if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
    if (!out) throw IoError("failed writing " + (dir / "manifest.json").string());
  }

  std::vector<char> bytes(total * 8);
  std::size_t offset = 0;
  for (const auto& rec : ckpt.parameters) {
    for (double v : rec.data) {
      put_le(std::bit_cast<std::uint64_t>(v), bytes.data() + offset);
      offset += 8;
    }
  }
  std::ofstream out(dir / "params.bin", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "params.bin").string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + (dir / "params.bin").string());
}

ModelCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw IoError("cannot open " + manifest_path.string());
  json manifest;
  try {
    manifest = json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }

  ModelCheckpoint ckpt;
  try {
    ckpt.format_version = manifest.at("format_version").get<int>();
    if (ckpt.format_version != kCheckpointFormatVersion) {
      throw IoError("checkpoint format_version " + std::to_string(ckpt.format_version) +
                    " is not supported (expected " + std::to_string(kCheckpointFormatVersion) + ")");
    }
    ckpt.config = network_config_from_json(manifest.at("config"), NetworkConfig::defaults());
    for (const json& p : manifest.at("parameters")) {
      ParameterRecord rec;
      rec.name = p.at("name").get<std::string>();
      rec.shape = p.at("shape").get<Shape>();
      ckpt.parameters.push_back(std::move(rec));
    }
  } catch (const json::exception& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(manifest_path.string() + ": " + e.what());
  }

  const auto bin_path = dir / "params.bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw IoError("cannot open " + bin_path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
  std::size_t expected = 0;
  for (const auto& rec : ckpt.parameters) expected += shape_size(rec.shape);
  if (bytes.size() != expected * 8) {
    throw IoError(bin_path.string() + " holds " + std::to_string(bytes.size()) + " bytes, manifest expects " +
                  std::to_string(expected * 8));
  }
  std::size_t offset = 0;
  for (auto& rec : ckpt.parameters) {
    rec.data.resize(shape_size(rec.shape));
    for (double& v : rec.data) {
      v = std::bit_cast<double>(get_le(bytes.data() + offset));
      offset += 8;
    }
  }
  return ckpt;
}

}  // namespace spil
