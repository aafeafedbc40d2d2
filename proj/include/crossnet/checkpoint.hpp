// JSON checkpoints: model config plus every named parameter tensor.
//
// Doubles are written with round-trip precision, so save -> load is exact.
#pragma once

#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include "crossnet/model.hpp"

namespace crossnet {

inline constexpr const char* kCheckpointFormat = "crossnet-checkpoint";
inline constexpr int kCheckpointVersion = 1;

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"hidden", c.hidden},
          {"mlp", c.mlp},
          {"attention", c.attention},
          {"dropout", c.dropout},
          {"classes", c.classes},
          {"embedding_dim", c.embedding_dim},
          {"attention_activation", activation_name(c.attention_activation)},
          {"arch", arch_name(c.arch)}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.hidden = j.at("hidden").get<std::size_t>();
  c.mlp = j.at("mlp").get<std::size_t>();
  c.attention = j.at("attention").get<std::size_t>();
  c.dropout = j.at("dropout").get<double>();
  c.classes = j.at("classes").get<std::size_t>();
  c.embedding_dim = j.at("embedding_dim").get<std::size_t>();
  c.attention_activation = parse_activation(j.at("attention_activation").get<std::string>());
  c.arch = parse_arch(j.at("arch").get<std::string>());
  c.validate();
  return c;
}

struct Checkpoint {
  ModelParams params;
  nlohmann::json meta = nlohmann::json::object();  // embedding seed, vectors path, source target, ...
};

inline nlohmann::json checkpoint_json(const ModelParams& params, const nlohmann::json& meta = nlohmann::json::object()) {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : params.named())
    tensors.push_back({{"name", p.name}, {"shape", p.node->value.shape()}, {"data", p.node->value.storage()}});
  return {{"format", kCheckpointFormat},
          {"version", kCheckpointVersion},
          {"config", to_json(params.config)},
          {"meta", meta},
          {"params", tensors}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != kCheckpointFormat) throw std::runtime_error("not a crossnet checkpoint");
  if (j.at("version").get<int>() != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version " + j.at("version").dump());
  Checkpoint ck;
  const auto cfg = model_config_from_json(j.at("config"));
  Rng scratch(0);
  ck.params = init_params(cfg, scratch);
  ck.meta = j.value("meta", nlohmann::json::object());
  const auto& stored = j.at("params");
  const auto slots = ck.params.named();
  if (stored.size() != slots.size())
    throw std::runtime_error("checkpoint holds " + std::to_string(stored.size()) + " tensors, model expects " +
                             std::to_string(slots.size()));
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto& s = stored[i];
    if (s.at("name").get<std::string>() != slots[i].name)
      throw std::runtime_error("checkpoint tensor " + std::to_string(i) + " is '" + s.at("name").get<std::string>() +
                               "', expected '" + slots[i].name + "'");
    Tensor t(s.at("shape").get<Shape>(), s.at("data").get<std::vector<double>>());
    if (t.shape() != slots[i].node->shape()) throw ShapeError("checkpoint " + slots[i].name, t.shape(), slots[i].node->shape());
    slots[i].node->value = std::move(t);
  }
  return ck;
}

// Writes to a sibling temp file, then renames over the destination.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::ios_base::failure("cannot write '" + tmp.string() + "'");
    out << contents;
    if (!out) throw std::ios_base::failure("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                            const nlohmann::json& meta = nlohmann::json::object()) {
  write_file_atomic(path, checkpoint_json(params, meta).dump());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open checkpoint '" + path.string() + "'");
  return checkpoint_from_json(nlohmann::json::parse(in));
}

}  // namespace crossnet
