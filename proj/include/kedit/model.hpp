#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kedit/activation.hpp"
#include "kedit/autodiff.hpp"
#include "kedit/noise.hpp"
#include "kedit/rng.hpp"
#include "kedit/tensor.hpp"

namespace kedit {

enum class FfnKind { kStandard, kGated };

std::string_view ffn_kind_name(FfnKind kind);
FfnKind parse_ffn_kind(std::string_view name);

struct ModelConfig {
  int n_layers = 4;
  int d_model = 64;
  int d_ffn = 256;
  int n_heads = 4;
  int vocab_size = 0;
  int max_seq = 32;
  FfnKind ffn_kind = FfnKind::kStandard;
  ActivationKind activation = ActivationKind::kGeluNew;
  std::uint64_t seed = 0;

  // Throws InvalidArgument on non-positive sizes or heads not dividing d_model.
  void validate() const;

  // ⌈n_layers/4⌉, at least 1.
  int default_edit_layer() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Gated models pair with silu unless overridden afterwards.
ModelConfig make_config(int vocab_size, FfnKind kind = FfnKind::kStandard);

// Parameter set of one transformer block. For standard FFNs w_up is unused and
// w_out is W_o; for gated FFNs w_out plays the role of W_d.
template <typename T>
struct LayerWeights {
  T ln1_gain, ln1_bias;
  T w_q, w_k, w_v, w_attn_out;
  T ln2_gain, ln2_bias;
  T w_in;   // d_model × d_ffn
  T w_up;   // d_model × d_ffn, gated only
  T w_out;  // d_ffn × d_model
};

template <typename T>
struct Weights {
  T token_embedding;     // vocab × d_model
  T position_embedding;  // max_seq × d_model
  std::vector<LayerWeights<T>> layers;
  T final_gain, final_bias;
  T unembedding;  // d_model × vocab

  // Visits every parameter in checkpoint manifest order.
  template <typename Self, typename F>
  static void visit(Self& w, bool gated, F&& f) {
    f(std::string("token_embedding"), w.token_embedding);
    f(std::string("position_embedding"), w.position_embedding);
    for (std::size_t l = 0; l < w.layers.size(); ++l) {
      auto& L = w.layers[l];
      const std::string p = "layers." + std::to_string(l + 1) + ".";
      f(p + "ln1_gain", L.ln1_gain);
      f(p + "ln1_bias", L.ln1_bias);
      f(p + "attn.w_q", L.w_q);
      f(p + "attn.w_k", L.w_k);
      f(p + "attn.w_v", L.w_v);
      f(p + "attn.w_out", L.w_attn_out);
      f(p + "ln2_gain", L.ln2_gain);
      f(p + "ln2_bias", L.ln2_bias);
      f(p + "ffn.w_in", L.w_in);
      if (gated) f(p + "ffn.w_up", L.w_up);
      f(p + "ffn.w_out", L.w_out);
    }
    f(std::string("final_gain"), w.final_gain);
    f(std::string("final_bias"), w.final_bias);
    f(std::string("unembedding"), w.unembedding);
  }
};

struct ModelBundle {
  ModelConfig config;
  Weights<Tensor> weights;

  bool gated() const noexcept { return config.ffn_kind == FfnKind::kGated; }

  template <typename F>
  void for_each_parameter(F&& f) {
    Weights<Tensor>::visit(weights, gated(), std::forward<F>(f));
  }
  template <typename F>
  void for_each_parameter(F&& f) const {
    Weights<Tensor>::visit(weights, gated(), std::forward<F>(f));
  }

  // The matrix edits write to: W_o, or W_d for gated FFNs. `layer` is 1-indexed.
  Tensor& value_projection(int layer);
  const Tensor& value_projection(int layer) const;

  bool all_finite() const;
};

// Seeded initialization from config.seed.
ModelBundle init_model(const ModelConfig& config);

enum class InterventionKind { kAddHidden, kNoiseAct, kReadAct, kReadAttn, kNoiseEmbedding };

// Layers are 1-indexed. kNoiseEmbedding ignores layers and positions and adds
// noise to every input embedding row.
struct Intervention {
  InterventionKind kind = InterventionKind::kReadAct;
  std::vector<int> layers;
  std::vector<std::size_t> positions;
  Tensor delta;            // kAddHidden, length d_model
  NoisePolicy noise;       // kNoiseAct, kNoiseEmbedding
  double noise_scale = 1.0;  // extra multiplier on the drawn noise
  RngStream* rng = nullptr;  // kNoiseAct, kNoiseEmbedding

  static Intervention add_hidden(int layer, std::size_t position, Tensor delta);
  static Intervention noise_act(std::vector<int> layers, std::vector<std::size_t> positions, NoisePolicy policy,
                                RngStream& rng);
  static Intervention noise_embedding(NoisePolicy policy, double scale, RngStream& rng);
  static Intervention read_act(int layer, std::vector<std::size_t> positions);
  static Intervention read_attn(int layer, std::vector<std::size_t> positions);
};

struct ActivationSample {
  int layer = 0;
  std::size_t position = 0;
  std::vector<double> values;  // post-f FFN activation, after any activation noise
};

struct AttentionRow {
  int layer = 0;
  std::size_t position = 0;
  std::vector<double> weights;  // head-averaged, length seq_len
};

struct ForwardTrace {
  Tensor logits;  // seq_len × vocab
  std::vector<ActivationSample> activations;
  std::vector<AttentionRow> attention;
  // Per layer (index l-1), always recorded:
  std::vector<Tensor> hidden;    // residual stream after the block (and after ADD_HIDDEN)
  std::vector<Tensor> ffn_keys;  // input to the value projection, seq_len × d_ffn
  std::vector<Tensor> ffn_out;   // FFN output added to the residual, seq_len × d_model
};

struct HiddenDelta {
  int layer = 0;
  std::size_t position = 0;
  ad::Var delta;
};

// Builds the forward pass on `g`. `extra_deltas` are differentiable ADD_HIDDEN
// payloads; `trace` may be null.
ad::Var forward_graph(ad::Graph& g, const ModelConfig& config, const Weights<ad::Var>& weights,
                      std::span<const int> tokens, std::span<const Intervention> interventions,
                      std::span<const HiddenDelta> extra_deltas, ForwardTrace* trace);

Weights<ad::Var> bind_constants(ad::Graph& g, const ModelBundle& model);
Weights<ad::Var> bind_leaves(ad::Graph& g, const ModelBundle& model);

ForwardTrace forward(const ModelBundle& model, std::span<const int> tokens,
                     std::span<const Intervention> interventions = {});

struct Decoding {
  enum class Kind { kGreedy, kSample } kind = Kind::kGreedy;
  double temperature = 1.0;
  RngStream* rng = nullptr;

  static Decoding greedy() { return {}; }
  static Decoding sample(double temperature, RngStream& rng) { return {Kind::kSample, temperature, &rng}; }
};

// Returns only the continuation. Stops early when the context reaches max_seq.
std::vector<int> generate(const ModelBundle& model, std::span<const int> prompt, std::size_t max_new_tokens,
                          const Decoding& decoding);

}  // namespace kedit
