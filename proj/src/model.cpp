#include "kedit/model.hpp"

#include <algorithm>
#include <cmath>

#include "kedit/error.hpp"

namespace kedit {

std::string_view ffn_kind_name(FfnKind kind) { return kind == FfnKind::kStandard ? "standard" : "gated"; }

FfnKind parse_ffn_kind(std::string_view name) {
  if (name == "standard") return FfnKind::kStandard;
  if (name == "gated") return FfnKind::kGated;
  throw Error(ErrorCode::kInvalidArgument, "unknown ffn kind '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (n_layers <= 0 || d_model <= 0 || d_ffn <= 0 || n_heads <= 0 || vocab_size <= 0 || max_seq <= 0) {
    throw Error(ErrorCode::kInvalidArgument, "model sizes must be positive");
  }
  if (d_model % n_heads != 0) throw Error(ErrorCode::kInvalidArgument, "n_heads must divide d_model");
}

int ModelConfig::default_edit_layer() const { return std::max(1, (n_layers + 3) / 4); }

ModelConfig make_config(int vocab_size, FfnKind kind) {
  ModelConfig c;
  c.vocab_size = vocab_size;
  c.ffn_kind = kind;
  c.activation = kind == FfnKind::kGated ? ActivationKind::kSilu : ActivationKind::kGeluNew;
  return c;
}

Tensor& ModelBundle::value_projection(int layer) {
  if (layer < 1 || layer > config.n_layers) throw Error(ErrorCode::kLayerOutOfRange, std::to_string(layer));
  return weights.layers[static_cast<std::size_t>(layer - 1)].w_out;
}

const Tensor& ModelBundle::value_projection(int layer) const {
  if (layer < 1 || layer > config.n_layers) throw Error(ErrorCode::kLayerOutOfRange, std::to_string(layer));
  return weights.layers[static_cast<std::size_t>(layer - 1)].w_out;
}

bool ModelBundle::all_finite() const {
  bool ok = true;
  for_each_parameter([&](const std::string&, const Tensor& t) { ok = ok && t.all_finite(); });
  return ok;
}

ModelBundle init_model(const ModelConfig& config) {
  config.validate();
  RngStream rng(config.seed, 0x1417);
  const auto d = static_cast<std::size_t>(config.d_model);
  const auto f = static_cast<std::size_t>(config.d_ffn);
  const auto v = static_cast<std::size_t>(config.vocab_size);
  const auto s = static_cast<std::size_t>(config.max_seq);
  const double residual_scale = 1.0 / std::sqrt(2.0 * config.n_layers);

  auto normal = [&](std::size_t rows, std::size_t cols, double stddev) {
    Tensor t({rows, cols});
    for (double& x : t.data()) x = stddev * rng.normal();
    return t;
  };
  auto fan_in = [](std::size_t n) { return 1.0 / std::sqrt(static_cast<double>(n)); };

  ModelBundle m;
  m.config = config;
  m.weights.token_embedding = normal(v, d, 0.1);
  m.weights.position_embedding = normal(s, d, 0.1);
  for (int l = 0; l < config.n_layers; ++l) {
    LayerWeights<Tensor> L;
    L.ln1_gain = Tensor({d}, 1.0);
    L.ln1_bias = Tensor({d}, 0.0);
    L.w_q = normal(d, d, fan_in(d));
    L.w_k = normal(d, d, fan_in(d));
    L.w_v = normal(d, d, fan_in(d));
    L.w_attn_out = normal(d, d, fan_in(d) * residual_scale);
    L.ln2_gain = Tensor({d}, 1.0);
    L.ln2_bias = Tensor({d}, 0.0);
    L.w_in = normal(d, f, fan_in(d));
    if (config.ffn_kind == FfnKind::kGated) L.w_up = normal(d, f, fan_in(d));
    L.w_out = normal(f, d, fan_in(f) * residual_scale);
    m.weights.layers.push_back(std::move(L));
  }
  m.weights.final_gain = Tensor({d}, 1.0);
  m.weights.final_bias = Tensor({d}, 0.0);
  m.weights.unembedding = normal(d, v, fan_in(d));
  return m;
}

Intervention Intervention::add_hidden(int layer, std::size_t position, Tensor delta) {
  Intervention iv;
  iv.kind = InterventionKind::kAddHidden;
  iv.layers = {layer};
  iv.positions = {position};
  iv.delta = std::move(delta);
  return iv;
}

Intervention Intervention::noise_act(std::vector<int> layers, std::vector<std::size_t> positions, NoisePolicy policy,
                                     RngStream& rng) {
  Intervention iv;
  iv.kind = InterventionKind::kNoiseAct;
  iv.layers = std::move(layers);
  iv.positions = std::move(positions);
  iv.noise = policy;
  iv.rng = &rng;
  return iv;
}

Intervention Intervention::noise_embedding(NoisePolicy policy, double scale, RngStream& rng) {
  Intervention iv;
  iv.kind = InterventionKind::kNoiseEmbedding;
  iv.noise = policy;
  iv.noise_scale = scale;
  iv.rng = &rng;
  return iv;
}

Intervention Intervention::read_act(int layer, std::vector<std::size_t> positions) {
  Intervention iv;
  iv.kind = InterventionKind::kReadAct;
  iv.layers = {layer};
  iv.positions = std::move(positions);
  return iv;
}

Intervention Intervention::read_attn(int layer, std::vector<std::size_t> positions) {
  Intervention iv;
  iv.kind = InterventionKind::kReadAttn;
  iv.layers = {layer};
  iv.positions = std::move(positions);
  return iv;
}

namespace {

void validate_interventions(const ModelConfig& config, std::size_t seq_len, std::span<const Intervention> ivs,
                            std::span<const HiddenDelta> deltas) {
  auto check_layer = [&](int l) {
    if (l < 1 || l > config.n_layers) {
      throw Error(ErrorCode::kLayerOutOfRange, "layer " + std::to_string(l) + " outside [1, " +
                                                   std::to_string(config.n_layers) + "]");
    }
  };
  auto check_pos = [&](std::size_t p) {
    if (p >= seq_len) {
      throw Error(ErrorCode::kPositionOutOfRange,
                  "position " + std::to_string(p) + " outside sequence of length " + std::to_string(seq_len));
    }
  };
  for (const auto& iv : ivs) {
    if (iv.kind == InterventionKind::kNoiseEmbedding) {
      if (!iv.noise.is_noop() && iv.rng == nullptr) throw Error(ErrorCode::kInvalidArgument, "noise needs an rng");
      continue;
    }
    for (int l : iv.layers) check_layer(l);
    for (std::size_t p : iv.positions) check_pos(p);
    if (iv.kind == InterventionKind::kAddHidden && iv.delta.size() != static_cast<std::size_t>(config.d_model)) {
      throw Error(ErrorCode::kDimensionMismatch, "hidden delta must have length d_model");
    }
    if (iv.kind == InterventionKind::kNoiseAct && !iv.noise.is_noop() && iv.rng == nullptr) {
      throw Error(ErrorCode::kInvalidArgument, "noise needs an rng");
    }
  }
  for (const auto& hd : deltas) {
    check_layer(hd.layer);
    check_pos(hd.position);
  }
}

bool touches(const Intervention& iv, int layer) {
  return std::find(iv.layers.begin(), iv.layers.end(), layer) != iv.layers.end();
}

template <typename F>
Weights<ad::Var> bind(const ModelBundle& model, F&& make) {
  Weights<ad::Var> out;
  out.layers.resize(model.weights.layers.size());
  std::vector<ad::Var*> slots;
  Weights<ad::Var>::visit(out, model.gated(), [&](const std::string&, ad::Var& v) { slots.push_back(&v); });
  std::size_t i = 0;
  model.for_each_parameter([&](const std::string&, const Tensor& t) { *slots[i++] = make(t); });
  return out;
}

}  // namespace

Weights<ad::Var> bind_constants(ad::Graph& g, const ModelBundle& model) {
  return bind(model, [&](const Tensor& t) { return g.constant(t); });
}

Weights<ad::Var> bind_leaves(ad::Graph& g, const ModelBundle& model) {
  return bind(model, [&](const Tensor& t) { return g.leaf(t); });
}

ad::Var forward_graph(ad::Graph& g, const ModelConfig& config, const Weights<ad::Var>& w,
                      std::span<const int> tokens, std::span<const Intervention> interventions,
                      std::span<const HiddenDelta> extra_deltas, ForwardTrace* trace) {
  const std::size_t seq_len = tokens.size();
  if (seq_len == 0) throw Error(ErrorCode::kEmptyInput, "empty token sequence");
  if (seq_len > static_cast<std::size_t>(config.max_seq)) {
    throw Error(ErrorCode::kPromptTooLong, "sequence of " + std::to_string(seq_len) + " exceeds max_seq");
  }
  for (int t : tokens) {
    if (t < 0 || t >= config.vocab_size) throw Error(ErrorCode::kInvalidArgument, "token id outside vocabulary");
  }
  validate_interventions(config, seq_len, interventions, extra_deltas);

  const auto d = static_cast<std::size_t>(config.d_model);
  const auto d_ffn = static_cast<std::size_t>(config.d_ffn);
  const auto heads = static_cast<std::size_t>(config.n_heads);

  std::vector<int> positions(seq_len);
  for (std::size_t i = 0; i < seq_len; ++i) positions[i] = static_cast<int>(i);
  ad::Var x = ad::add(ad::embedding(w.token_embedding, tokens), ad::embedding(w.position_embedding, positions));

  for (const auto& iv : interventions) {
    if (iv.kind != InterventionKind::kNoiseEmbedding || iv.noise.is_noop()) continue;
    Tensor noise({seq_len, d});
    for (std::size_t r = 0; r < seq_len; ++r) {
      const auto row = sample_noise(iv.noise, d, *iv.rng);
      for (std::size_t c = 0; c < d; ++c) noise.at(r, c) = iv.noise_scale * row[c];
    }
    x = ad::add(x, g.constant(std::move(noise)));
  }

  if (trace != nullptr) {
    trace->hidden.clear();
    trace->ffn_keys.clear();
    trace->ffn_out.clear();
    trace->activations.clear();
    trace->attention.clear();
  }

  for (int layer = 1; layer <= config.n_layers; ++layer) {
    const auto& L = w.layers[static_cast<std::size_t>(layer - 1)];

    const ad::Var a = ad::layer_norm(x, L.ln1_gain, L.ln1_bias);
    const ad::Var q = ad::matmul(a, L.w_q);
    const ad::Var k = ad::matmul(a, L.w_k);
    const ad::Var v = ad::matmul(a, L.w_v);
    std::vector<Tensor> probs;
    const bool want_attn = trace != nullptr && std::any_of(interventions.begin(), interventions.end(), [&](const auto& iv) {
                             return iv.kind == InterventionKind::kReadAttn && touches(iv, layer);
                           });
    const ad::Var attn = ad::causal_attention(q, k, v, heads, want_attn ? &probs : nullptr);
    x = ad::add(x, ad::matmul(attn, L.w_attn_out));

    const ad::Var m = ad::layer_norm(x, L.ln2_gain, L.ln2_bias);
    ad::Var act = ad::activation(ad::matmul(m, L.w_in), config.activation);

    for (const auto& iv : interventions) {
      if (iv.kind != InterventionKind::kNoiseAct || iv.noise.is_noop() || !touches(iv, layer)) continue;
      for (std::size_t p : iv.positions) {
        auto noise = sample_noise(iv.noise, d_ffn, *iv.rng);
        if (iv.noise_scale != 1.0) {
          for (double& n : noise) n *= iv.noise_scale;
        }
        act = ad::add_at_row(act, p, g.constant(Tensor::vector(std::move(noise))));
      }
    }

    ad::Var key = act;
    if (config.ffn_kind == FfnKind::kGated) key = ad::mul(act, ad::matmul(m, L.w_up));
    const ad::Var ffn = ad::matmul(key, L.w_out);
    x = ad::add(x, ffn);

    for (const auto& iv : interventions) {
      if (iv.kind != InterventionKind::kAddHidden || !touches(iv, layer)) continue;
      x = ad::add_at_row(x, iv.positions.front(), g.constant(iv.delta));
    }
    for (const auto& hd : extra_deltas) {
      if (hd.layer == layer) x = ad::add_at_row(x, hd.position, hd.delta);
    }

    if (trace == nullptr) continue;
    trace->hidden.push_back(x.value());
    trace->ffn_keys.push_back(key.value());
    trace->ffn_out.push_back(ffn.value());
    for (const auto& iv : interventions) {
      if (!touches(iv, layer)) continue;
      if (iv.kind == InterventionKind::kReadAct) {
        for (std::size_t p : iv.positions) {
          auto row = act.value().row(p);
          trace->activations.push_back({layer, p, std::vector<double>(row.begin(), row.end())});
        }
      } else if (iv.kind == InterventionKind::kReadAttn) {
        for (std::size_t p : iv.positions) {
          std::vector<double> avg(seq_len, 0.0);
          for (const auto& ph : probs) {
            for (std::size_t j = 0; j < seq_len; ++j) avg[j] += ph.at(p, j);
          }
          for (double& a_ : avg) a_ /= static_cast<double>(heads);
          trace->attention.push_back({layer, p, std::move(avg)});
        }
      }
    }
  }

  const ad::Var final = ad::layer_norm(x, w.final_gain, w.final_bias);
  const ad::Var logits = ad::matmul(final, w.unembedding);
  if (trace != nullptr) trace->logits = logits.value();
  return logits;
}

ForwardTrace forward(const ModelBundle& model, std::span<const int> tokens, std::span<const Intervention> interventions) {
  ad::Graph g;
  const auto w = bind_constants(g, model);
  ForwardTrace trace;
  forward_graph(g, model.config, w, tokens, interventions, {}, &trace);
  return trace;
}

std::vector<int> generate(const ModelBundle& model, std::span<const int> prompt, std::size_t max_new_tokens,
                          const Decoding& decoding) {
  if (prompt.empty()) throw Error(ErrorCode::kEmptyInput, "prompt must be non-empty");
  const auto max_seq = static_cast<std::size_t>(model.config.max_seq);
  if (prompt.size() > max_seq) throw Error(ErrorCode::kPromptTooLong, "prompt exceeds max_seq");
  if (decoding.kind == Decoding::Kind::kSample && (decoding.rng == nullptr || !(decoding.temperature > 0.0))) {
    throw Error(ErrorCode::kInvalidArgument, "sampling needs an rng and a positive temperature");
  }
  std::vector<int> context(prompt.begin(), prompt.end());
  std::vector<int> out;
  while (out.size() < max_new_tokens && context.size() < max_seq) {
    const ForwardTrace trace = forward(model, context);
    const auto last = trace.logits.row(trace.logits.rows() - 1);
    int next = 0;
    if (decoding.kind == Decoding::Kind::kGreedy) {
      next = static_cast<int>(std::max_element(last.begin(), last.end()) - last.begin());
    } else {
      const double mx = *std::max_element(last.begin(), last.end());
      std::vector<double> p(last.size());
      double z = 0.0;
      for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = std::exp((last[i] - mx) / decoding.temperature);
        z += p[i];
      }
      double u = decoding.rng->uniform() * z;
      next = static_cast<int>(p.size() - 1);
      for (std::size_t i = 0; i < p.size(); ++i) {
        u -= p[i];
        if (u < 0.0) {
          next = static_cast<int>(i);
          break;
        }
      }
    }
    out.push_back(next);
    context.push_back(next);
  }
  return out;
}

}  // namespace kedit
