#include "kedit/noise.hpp"

#include "kedit/error.hpp"

namespace kedit {

std::vector<int> NoisePolicy::layers(int edit_layer) const {
  if (is_noop() || target != NoiseTarget::kFfnActivation) return {};
  if (layer_range == LayerRange::kShallow) return {edit_layer};
  std::vector<int> out;
  for (int l = 1; l <= edit_layer; ++l) out.push_back(l);
  return out;
}

NoisePolicy build_noise_policy(NoiseVariant variant, double alpha) {
  if (!(alpha >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be non-negative");
  NoisePolicy p;
  p.variant = variant;
  p.alpha = alpha;
  switch (variant) {
    case NoiseVariant::kDNE:
      p.distribution = NoiseDistribution::kGaussian;
      break;
    case NoiseVariant::kSNE:
      p.distribution = NoiseDistribution::kGaussian;
      p.layer_range = LayerRange::kShallow;
      break;
    case NoiseVariant::kUN:
      p.distribution = NoiseDistribution::kUniform;
      break;
    case NoiseVariant::kRNP:
      p.distribution = NoiseDistribution::kGaussian;
      p.position_rule = PositionRule::kRandomToken;
      break;
    case NoiseVariant::kNT:
      p.distribution = NoiseDistribution::kUniform;
      p.target = NoiseTarget::kParameters;
      break;
    case NoiseVariant::kNE:
      p.distribution = NoiseDistribution::kUniform;
      p.target = NoiseTarget::kEmbeddings;
      break;
    case NoiseVariant::kNone:
      p.distribution = NoiseDistribution::kNone;
      break;
  }
  return p;
}

NoisePolicy build_noise_policy(std::string_view variant, double alpha) {
  return build_noise_policy(parse_variant(variant), alpha);
}

std::vector<double> sample_noise(const NoisePolicy& policy, std::size_t dim, RngStream& rng) {
  if (dim == 0) throw Error(ErrorCode::kInvalidArgument, "noise dimension must be positive");
  std::vector<double> out(dim, 0.0);
  if (policy.is_noop()) return out;
  if (policy.distribution == NoiseDistribution::kGaussian) {
    for (double& v : out) v = policy.alpha * rng.normal();
  } else {
    for (double& v : out) v = policy.alpha * rng.symmetric();
  }
  return out;
}

std::string_view variant_name(NoiseVariant v) {
  switch (v) {
    case NoiseVariant::kDNE: return "DNE";
    case NoiseVariant::kSNE: return "SNE";
    case NoiseVariant::kUN: return "UN";
    case NoiseVariant::kRNP: return "RNP";
    case NoiseVariant::kNT: return "NT";
    case NoiseVariant::kNE: return "NE";
    case NoiseVariant::kNone: return "NONE";
  }
  return "NONE";
}

NoiseVariant parse_variant(std::string_view name) {
  for (NoiseVariant v : {NoiseVariant::kDNE, NoiseVariant::kSNE, NoiseVariant::kUN, NoiseVariant::kRNP,
                         NoiseVariant::kNT, NoiseVariant::kNE, NoiseVariant::kNone}) {
    if (variant_name(v) == name) return v;
  }
  throw Error(ErrorCode::kUnknownVariant, "unknown noise variant '" + std::string(name) + "'");
}

std::string_view distribution_name(NoiseDistribution d) {
  switch (d) {
    case NoiseDistribution::kGaussian: return "gaussian";
    case NoiseDistribution::kUniform: return "uniform";
    case NoiseDistribution::kNone: return "none";
  }
  return "none";
}

std::string_view layer_range_name(LayerRange r) { return r == LayerRange::kDeep ? "deep" : "shallow"; }

std::string_view position_rule_name(PositionRule r) {
  return r == PositionRule::kLastSubject ? "last_subject" : "random_token";
}

std::string_view target_name(NoiseTarget t) {
  switch (t) {
    case NoiseTarget::kFfnActivation: return "ffn_activation";
    case NoiseTarget::kParameters: return "parameters";
    case NoiseTarget::kEmbeddings: return "embeddings";
  }
  return "ffn_activation";
}

NoiseDistribution parse_distribution(std::string_view name) {
  if (name == "gaussian") return NoiseDistribution::kGaussian;
  if (name == "uniform") return NoiseDistribution::kUniform;
  if (name == "none") return NoiseDistribution::kNone;
  throw Error(ErrorCode::kInvalidArgument, "unknown distribution '" + std::string(name) + "'");
}

LayerRange parse_layer_range(std::string_view name) {
  if (name == "deep") return LayerRange::kDeep;
  if (name == "shallow") return LayerRange::kShallow;
  throw Error(ErrorCode::kInvalidArgument, "unknown layer range '" + std::string(name) + "'");
}

PositionRule parse_position_rule(std::string_view name) {
  if (name == "last_subject") return PositionRule::kLastSubject;
  if (name == "random_token") return PositionRule::kRandomToken;
  throw Error(ErrorCode::kInvalidArgument, "unknown position rule '" + std::string(name) + "'");
}

NoiseTarget parse_target(std::string_view name) {
  if (name == "ffn_activation") return NoiseTarget::kFfnActivation;
  if (name == "parameters") return NoiseTarget::kParameters;
  if (name == "embeddings") return NoiseTarget::kEmbeddings;
  throw Error(ErrorCode::kInvalidArgument, "unknown noise target '" + std::string(name) + "'");
}

}  // namespace kedit
