#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "kedit/dataset.hpp"
#include "kedit/editor.hpp"
#include "kedit/eval.hpp"
#include "kedit/model.hpp"
#include "kedit/train.hpp"

namespace kedit {

struct ExperimentConfig {
  std::uint64_t master_seed = 0;
  std::filesystem::path output_dir = "run";

  // An existing JSONL dataset replaces the synthetic generator when set.
  std::optional<std::filesystem::path> dataset_path;
  SyntheticOptions dataset;  // seed is always master_seed

  // ModelConfig fields; vocab_size comes from the dataset and seed defaults
  // to master_seed.
  nlohmann::json model = nlohmann::json::object();
  TrainOptions train;

  std::vector<int> probe_layers;  // empty probes every layer
  std::size_t probe_bins = 100;

  std::string method = "memit";  // or "rome"
  std::size_t edit_batch_size = 8;
  std::vector<std::string> case_ids;  // explicit batch, overrides edit_batch_size
  std::string variant = "DNE";
  std::optional<double> alpha;  // default_alpha(batch size) when unset
  nlohmann::json plan = nlohmann::json::object();  // EditPlan overrides

  std::string suite = "zsre";  // or "counterfacts"
  std::size_t max_new_tokens = 8;

  std::vector<double> sweep_alphas;  // empty selects 0.05, 0.10, ..., 0.50
  bool run_sweep = true;             // part of `pipeline`

  // Throws InvalidArgument or UnknownVariant on bad values or missing paths.
  void validate() const;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j);
nlohmann::json experiment_to_json(const ExperimentConfig& config);
ExperimentConfig load_experiment(const std::filesystem::path& path);

std::vector<double> default_sweep_alphas();

// Fraction of prompts whose true object is the teacher-forced argmax at every
// target position.
struct FactRecall {
  std::size_t edit_hits = 0;
  std::size_t edit_total = 0;
  std::size_t paraphrase_hits = 0;
  std::size_t paraphrase_total = 0;

  double edit_rate() const { return edit_total == 0 ? 0.0 : double(edit_hits) / double(edit_total); }
  double paraphrase_rate() const {
    return paraphrase_total == 0 ? 0.0 : double(paraphrase_hits) / double(paraphrase_total);
  }
};
FactRecall fact_recall(const ModelBundle& model, const Vocabulary& vocab, const std::vector<FactRecord>& records);

// Model config for a vocabulary of `vocab_size` with the experiment's overrides.
ModelConfig experiment_model_config(const ExperimentConfig& config, int vocab_size);

// Edit batch per the config: explicit case ids in order, otherwise
// edit_batch_size records taken along a Fisher–Yates shuffle drawn from
// (master_seed, fnv1a64("edit-batch")), skipping repeated subjects while
// unused ones remain.
EditBatch select_edit_batch(const ExperimentConfig& config, const std::vector<FactRecord>& records);

EditPlan experiment_plan(const ExperimentConfig& config, const ModelConfig& model, std::size_t batch_size);

// Covariance statistics over the tokenized training corpus at the layers the
// plan writes to.
std::map<int, Tensor> plan_covariances(const ModelBundle& model, const Vocabulary& vocab,
                                       const std::vector<FactRecord>& records, const EditPlan& plan,
                                       const std::string& method);

EditResult run_edit(const ModelBundle& model, const Vocabulary& vocab, const EditBatch& batch, const EditPlan& plan,
                    const std::map<int, Tensor>& covariances, const std::string& method);

EditReport run_suite(const ModelBundle& model, const Vocabulary& vocab, const std::vector<FactRecord>& records,
                     const std::string& suite, std::size_t max_new_tokens);

// Stages read their inputs from and write their outputs under output_dir:
//   data/   dataset.jsonl
//   model/  checkpoint, losses.csv
//   probe/  report.json, layer_<l>.csv
//   edit/   batch.jsonl, delta/, model/, delta_log.csv
//   eval/   report.json, cases.csv, pre_report.json
//   sweep/  alpha_sweep.csv
// Each writes manifest.json with input/output hashes and seeds. A failing
// stage leaves a FAILED marker and rethrows with the stage name.
void stage_gen_data(const ExperimentConfig& config);
void stage_train(const ExperimentConfig& config);
void stage_probe(const ExperimentConfig& config);
void stage_edit(const ExperimentConfig& config);
void stage_eval(const ExperimentConfig& config);
// Empty `alphas` uses the config's list.
void stage_sweep(const ExperimentConfig& config, std::vector<double> alphas = {});

// gen-data, train, probe, edit, eval and (when run_sweep) sweep.
void run_pipeline(const ExperimentConfig& config);

}  // namespace kedit
