#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kedit/checkpoint.hpp"
#include "kedit/dataset.hpp"
#include "kedit/model.hpp"
#include "kedit/noise.hpp"
#include "kedit/tokenizer.hpp"

namespace kedit {

struct EditBatch {
  std::vector<FactRecord> records;
  std::uint64_t master_seed = 0;
};

struct Conflict {
  std::string case_a;
  std::string case_b;
  std::string subject;
  std::string relation;
};

struct ConflictReport {
  std::vector<Conflict> conflicts;
  bool ok() const noexcept { return conflicts.empty(); }
  std::string describe() const;
};

// Every pair of records with equal (subject, relation) and different target_new.
ConflictReport validate_batch(const EditBatch& batch);

struct EditPlan {
  int layer = 1;                      // L, 1-indexed
  std::vector<int> critical_layers{1};  // R, ascending, ends at L
  int opt_steps = 25;
  double learning_rate = 5.0;
  double clamp_factor = 4.0;  // β
  double stop_threshold = 5e-2;
  NoisePolicy noise;
  double covariance_ridge = -1.0;  // λ_c; negative selects 1e-4·trace(C)/d_ffn
  double memit_regularizer = 300.0;  // λ, against C normalized per token
  std::vector<std::string> key_prefixes{""};

  // Throws InvalidArgument when an invariant is violated.
  void validate(const ModelConfig& config) const;
};

EditPlan default_plan(const ModelConfig& config);

// α keyed by batch-size decade: 0.5, 0.4, 0.3, 0.2, 0.1 for 1e0 … 1e4 edits,
// linear in log10(|M|) between decades and clamped outside.
double default_alpha(std::size_t batch_size);

nlohmann::json plan_to_json(const EditPlan& plan);
EditPlan plan_from_json(const nlohmann::json& j, const ModelConfig& config);
nlohmann::json policy_to_json(const NoisePolicy& policy);
NoisePolicy policy_from_json(const nlohmann::json& j);

// Tokenized view of a record's edit prompt.
struct EditSite {
  std::vector<int> prompt;
  std::vector<int> target;  // target_new tokens
  SubjectSpan subject;
};
EditSite make_edit_site(const Vocabulary& vocab, const FactRecord& record);

struct DeltaStep {
  int step = 0;
  double loss = 0.0;
  double delta_norm = 0.0;  // after the update and clamp
  double bound = 0.0;       // β·‖h‖
};

struct DeltaResult {
  Tensor delta;         // length d_model
  Tensor hidden;        // unmodified h at (L, last subject token)
  Tensor value;         // unmodified FFN output at the same site
  int steps = 0;        // gradient updates taken
  double initial_loss = 0.0;
  double final_loss = 0.0;  // noise-free loss with δ applied
  std::vector<DeltaStep> log;
};

// Gradient descent on δ added to the post-block hidden state at
// (plan.layer, last subject token), with the plan's noise resampled each step.
DeltaResult compute_delta(const ModelBundle& model, const Vocabulary& vocab, const FactRecord& record,
                          const EditPlan& plan, RngStream& rng);

// Summed −log P(target_new | edit prompt) under `model`, optionally with a hidden delta.
double target_nll(const ModelBundle& model, const EditSite& site, int layer, const Tensor* delta);

// Mean key (input to the value projection) at (layer, last subject token)
// over the plan's prefixes, noise off.
Tensor estimate_key(const ModelBundle& model, const Vocabulary& vocab, const FactRecord& record,
                    const EditPlan& plan, int layer);

// C = (1/N)·Σ k·kᵀ + ridge·I over keys of every token in `corpus` at `layer`.
// Throws SingularCovariance when ridge = 0 and C is not positive definite.
Tensor estimate_covariance(const ModelBundle& model, const std::vector<std::vector<int>>& corpus, int layer,
                           double ridge);
// The same average over explicit keys, without the singularity check.
Tensor covariance_from_keys(const std::vector<std::vector<double>>& keys, std::size_t dim, double ridge);

// Covariances for every layer of `layers` from one pass over the corpus.
// A negative ridge selects 1e-4·trace(C)/d_ffn per layer.
std::map<int, Tensor> estimate_covariances(const ModelBundle& model, const std::vector<std::vector<int>>& corpus,
                                           const std::vector<int>& layers, double ridge);

// W' = W + (C⁻¹k)(v − Wᵀk)ᵀ / (kᵀC⁻¹k) for W of shape d_ffn × d_model.
Tensor apply_rome(const Tensor& w, const Tensor& key, const Tensor& value, const Tensor& covariance);

// Δ = (λ·C + K·Kᵀ)⁻¹ · K·Rᵀ with keys K (d_ffn × n) and residuals R (d_model × n).
Tensor memit_layer_update(const Tensor& covariance, const Tensor& keys, const Tensor& residuals, double lambda);

struct EditResult {
  WeightDelta delta;
  std::vector<DeltaResult> deltas;  // one per record, batch order
};

// Noise stream for a record: (master_seed, fnv1a64(case_id)).
RngStream record_stream(std::uint64_t master_seed, const std::string& case_id);

// Multi-layer batch edit across plan.critical_layers. Throws Conflict without
// touching anything when validate_batch fails.
EditResult apply_memit(const ModelBundle& model, const Vocabulary& vocab, const EditBatch& batch,
                       const EditPlan& plan, const std::map<int, Tensor>& covariances);

// Sequential single-layer rank-one edits at plan.layer.
EditResult apply_rome_batch(const ModelBundle& model, const Vocabulary& vocab, const EditBatch& batch,
                            const EditPlan& plan, const std::map<int, Tensor>& covariances);

// NT: every parameter tensor t gets α·std(t)·U(−1,1) elementwise.
void perturb_parameters(ModelBundle& model, const NoisePolicy& policy, RngStream& rng);

}  // namespace kedit
