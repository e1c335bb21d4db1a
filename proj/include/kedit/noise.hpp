#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "kedit/rng.hpp"

namespace kedit {

enum class NoiseDistribution { kGaussian, kUniform, kNone };
enum class LayerRange { kDeep, kShallow };  // layers 1..L, or L only
enum class PositionRule { kLastSubject, kRandomToken };
enum class NoiseTarget { kFfnActivation, kParameters, kEmbeddings };

enum class NoiseVariant { kDNE, kSNE, kUN, kRNP, kNT, kNE, kNone };

struct NoisePolicy {
  NoiseVariant variant = NoiseVariant::kNone;
  NoiseDistribution distribution = NoiseDistribution::kNone;
  double alpha = 0.0;
  LayerRange layer_range = LayerRange::kDeep;
  PositionRule position_rule = PositionRule::kLastSubject;
  NoiseTarget target = NoiseTarget::kFfnActivation;

  bool is_noop() const noexcept { return distribution == NoiseDistribution::kNone || alpha == 0.0; }

  // Layers (1-indexed) an activation-noise policy touches for edit layer L.
  std::vector<int> layers(int edit_layer) const;

  friend bool operator==(const NoisePolicy&, const NoisePolicy&) = default;
};

NoisePolicy build_noise_policy(NoiseVariant variant, double alpha);
NoisePolicy build_noise_policy(std::string_view variant, double alpha);

// gaussian: α·ε, ε ~ N(0,1); uniform: α·u, u ~ U(−1,1); none or α = 0: zeros
// without consuming any draws.
std::vector<double> sample_noise(const NoisePolicy& policy, std::size_t dim, RngStream& rng);

std::string_view variant_name(NoiseVariant v);
NoiseVariant parse_variant(std::string_view name);
std::string_view distribution_name(NoiseDistribution d);
std::string_view layer_range_name(LayerRange r);
std::string_view position_rule_name(PositionRule r);
std::string_view target_name(NoiseTarget t);
NoiseDistribution parse_distribution(std::string_view name);
LayerRange parse_layer_range(std::string_view name);
PositionRule parse_position_rule(std::string_view name);
NoiseTarget parse_target(std::string_view name);

}  // namespace kedit
