#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "kedit/model.hpp"
#include "kedit/tokenizer.hpp"

namespace kedit {

inline constexpr int kCheckpointFormatVersion = 1;

nlohmann::json config_to_json(const ModelConfig& config);
ModelConfig config_from_json(const nlohmann::json& j);

// Directory layout: config.json (config fields, format_version, manifest of
// {name, shape} in weight order), weights.bin (little-endian float64,
// concatenated in manifest order), vocab.json (token → id).
void save_checkpoint(const std::filesystem::path& dir, const ModelBundle& model, const Vocabulary& vocab);
ModelBundle load_checkpoint(const std::filesystem::path& dir);
Vocabulary load_vocabulary(const std::filesystem::path& dir);

// Per-layer additive updates to the value projection (W_o, or W_d when gated).
struct WeightDelta {
  std::map<int, Tensor> layers;  // 1-indexed layer → delta matrix

  bool all_zero() const;
};

// Same weight format as a checkpoint with `"delta": true` in config.json.
void save_weight_delta(const std::filesystem::path& dir, const ModelConfig& config, const WeightDelta& delta);
WeightDelta load_weight_delta(const std::filesystem::path& dir);

void apply_weight_delta(ModelBundle& model, const WeightDelta& delta);

// Stable content hash of all parameters, used in manifests.
std::string model_fingerprint(const ModelBundle& model);

}  // namespace kedit
