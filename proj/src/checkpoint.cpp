#include "kedit/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kedit/error.hpp"
#include "kedit/rng.hpp"

namespace kedit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

std::uint64_t to_little_endian(std::uint64_t bits) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t out = 0;
    for (int i = 0; i < 8; ++i) out |= ((bits >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return out;
  }
  return bits;
}

void append_doubles(std::string& buffer, const std::vector<double>& values) {
  for (double v : values) {
    const std::uint64_t le = to_little_endian(std::bit_cast<std::uint64_t>(v));
    char bytes[8];
    std::memcpy(bytes, &le, 8);
    buffer.append(bytes, 8);
  }
}

void write_weights(const fs::path& path, const std::vector<const Tensor*>& tensors) {
  std::string buffer;
  for (const Tensor* t : tensors) append_doubles(buffer, t->data());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out.write(buffer.data(), static_cast<std::streamsize>(buffer.size()));
}

std::vector<double> read_weights(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() % 8 != 0) throw Error(ErrorCode::kParse, "weights.bin length is not a multiple of 8");
  std::vector<double> out(bytes.size() / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t le = 0;
    std::memcpy(&le, bytes.data() + 8 * i, 8);
    out[i] = std::bit_cast<double>(to_little_endian(le));
  }
  return out;
}

json manifest_entry(const std::string& name, const Tensor& t) {
  return json{{"name", name}, {"shape", t.shape()}};
}

// Reads manifest entries into tensors, consuming `flat` in order.
std::vector<std::pair<std::string, Tensor>> unpack(const json& manifest, const std::vector<double>& flat) {
  std::vector<std::pair<std::string, Tensor>> out;
  std::size_t offset = 0;
  for (const auto& entry : manifest) {
    auto shape = entry.at("shape").get<std::vector<std::size_t>>();
    std::size_t n = 1;
    for (auto s : shape) n *= s;
    if (offset + n > flat.size()) throw Error(ErrorCode::kParse, "weights.bin shorter than manifest");
    std::vector<double> data(flat.begin() + static_cast<std::ptrdiff_t>(offset),
                             flat.begin() + static_cast<std::ptrdiff_t>(offset + n));
    offset += n;
    out.emplace_back(entry.at("name").get<std::string>(), Tensor(std::move(shape), std::move(data)));
  }
  if (offset != flat.size()) throw Error(ErrorCode::kParse, "weights.bin longer than manifest");
  return out;
}

}  // namespace

json config_to_json(const ModelConfig& c) {
  return json{{"n_layers", c.n_layers},
              {"d_model", c.d_model},
              {"d_ffn", c.d_ffn},
              {"n_heads", c.n_heads},
              {"vocab_size", c.vocab_size},
              {"max_seq", c.max_seq},
              {"ffn_kind", ffn_kind_name(c.ffn_kind)},
              {"activation", activation_name(c.activation)},
              {"seed", c.seed}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig c;
  try {
    c.n_layers = j.value("n_layers", c.n_layers);
    c.d_model = j.value("d_model", c.d_model);
    c.d_ffn = j.value("d_ffn", c.d_ffn);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.vocab_size = j.value("vocab_size", c.vocab_size);
    c.max_seq = j.value("max_seq", c.max_seq);
    c.ffn_kind = parse_ffn_kind(j.value("ffn_kind", std::string(ffn_kind_name(c.ffn_kind))));
    const std::string default_act = c.ffn_kind == FfnKind::kGated ? "silu" : "gelu_new";
    c.activation = parse_activation(j.value("activation", default_act));
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("model config: ") + e.what());
  }
  return c;
}

void save_checkpoint(const fs::path& dir, const ModelBundle& model, const Vocabulary& vocab) {
  fs::create_directories(dir);
  json cfg = config_to_json(model.config);
  cfg["format_version"] = kCheckpointFormatVersion;
  cfg["delta"] = false;
  json manifest = json::array();
  std::vector<const Tensor*> tensors;
  model.for_each_parameter([&](const std::string& name, const Tensor& t) {
    manifest.push_back(manifest_entry(name, t));
    tensors.push_back(&t);
  });
  cfg["manifest"] = manifest;
  write_json(dir / "config.json", cfg);
  write_weights(dir / "weights.bin", tensors);

  json v = json::object();
  for (std::size_t i = 0; i < vocab.size(); ++i) v[vocab.words()[i]] = i;
  write_json(dir / "vocab.json", v);
}

ModelBundle load_checkpoint(const fs::path& dir) {
  const json cfg = read_json(dir / "config.json");
  if (cfg.value("format_version", 0) != kCheckpointFormatVersion) {
    throw Error(ErrorCode::kParse, "unsupported checkpoint format version");
  }
  if (cfg.value("delta", false)) throw Error(ErrorCode::kParse, "directory holds a weight delta, not a model");
  ModelBundle model = init_model(config_from_json(cfg));
  const auto tensors = unpack(cfg.at("manifest"), read_weights(dir / "weights.bin"));
  std::size_t i = 0;
  model.for_each_parameter([&](const std::string& name, Tensor& t) {
    if (i >= tensors.size() || tensors[i].first != name) {
      throw Error(ErrorCode::kParse, "manifest does not match model layout at '" + name + "'");
    }
    if (!tensors[i].second.same_shape(t)) throw Error(ErrorCode::kParse, "shape mismatch for '" + name + "'");
    t = tensors[i].second;
    ++i;
  });
  if (i != tensors.size()) throw Error(ErrorCode::kParse, "manifest lists extra tensors");
  return model;
}

Vocabulary load_vocabulary(const fs::path& dir) {
  const json v = read_json(dir / "vocab.json");
  std::vector<std::string> words(v.size());
  for (const auto& [word, id] : v.items()) {
    const auto idx = id.get<std::size_t>();
    if (idx >= words.size()) throw Error(ErrorCode::kParse, "vocabulary ids are not dense");
    words[idx] = word;
  }
  return Vocabulary::from_words(std::move(words));
}

bool WeightDelta::all_zero() const {
  for (const auto& [layer, t] : layers) {
    for (double v : t.data()) {
      if (v != 0.0) return false;
    }
  }
  return true;
}

void save_weight_delta(const fs::path& dir, const ModelConfig& config, const WeightDelta& delta) {
  fs::create_directories(dir);
  json cfg = config_to_json(config);
  cfg["format_version"] = kCheckpointFormatVersion;
  cfg["delta"] = true;
  json manifest = json::array();
  std::vector<const Tensor*> tensors;
  for (const auto& [layer, t] : delta.layers) {
    manifest.push_back(manifest_entry("layers." + std::to_string(layer) + ".ffn.w_out", t));
    tensors.push_back(&t);
  }
  cfg["manifest"] = manifest;
  write_json(dir / "config.json", cfg);
  write_weights(dir / "weights.bin", tensors);
}

WeightDelta load_weight_delta(const fs::path& dir) {
  const json cfg = read_json(dir / "config.json");
  if (!cfg.value("delta", false)) throw Error(ErrorCode::kParse, "checkpoint is not a weight delta");
  WeightDelta delta;
  for (auto& [name, t] : unpack(cfg.at("manifest"), read_weights(dir / "weights.bin"))) {
    // "layers.<l>.ffn.w_out"
    const auto first = name.find('.');
    const auto second = name.find('.', first + 1);
    delta.layers.emplace(std::stoi(name.substr(first + 1, second - first - 1)), std::move(t));
  }
  return delta;
}

void apply_weight_delta(ModelBundle& model, const WeightDelta& delta) {
  for (const auto& [layer, d] : delta.layers) {
    Tensor& w = model.value_projection(layer);
    if (!w.same_shape(d)) throw Error(ErrorCode::kDimensionMismatch, "delta shape mismatch");
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += d[i];
  }
}

std::string model_fingerprint(const ModelBundle& model) {
  std::string buffer;
  model.for_each_parameter([&](const std::string& name, const Tensor& t) {
    buffer += name;
    append_doubles(buffer, t.data());
  });
  std::ostringstream os;
  os << std::hex << fnv1a64(buffer);
  return os.str();
}

}  // namespace kedit
