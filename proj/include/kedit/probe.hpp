#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kedit/model.hpp"
#include "kedit/tokenizer.hpp"

namespace kedit {

struct PromptPair {
  std::string original;    // p
  std::string paraphrase;  // p*
  std::string subject;
};

struct ProbeSets {
  int layer = 0;
  // Two samples per pair, original first: H[2i] from p, H[2i+1] from p*.
  std::vector<ActivationSample> experimental;  // H_s, last subject token
  std::vector<ActivationSample> control;       // H_c, inserted "(" token
  std::vector<std::vector<double>> diff_experimental;  // D_s
  std::vector<std::vector<double>> diff_control;       // D_c
};

// Prompt tokens with "(" inserted right before the subject span.
struct InstrumentedPrompt {
  std::vector<int> tokens;
  std::size_t control_position = 0;
  std::size_t subject_last = 0;
};
InstrumentedPrompt instrument_prompt(const Vocabulary& vocab, const std::string& prompt, const std::string& subject);

// Throws SubjectNotFound naming the failing pair index.
ProbeSets collect_activation_sets(const ModelBundle& model, const Vocabulary& vocab,
                                  const std::vector<PromptPair>& pairs, int layer);

// D = h(p*) − h(p) per pair for both sets. Throws LengthMismatch.
ProbeSets diff_sets(ProbeSets probe);

struct Histogram {
  std::vector<double> edges;  // n_bins + 1, strictly increasing
  std::vector<std::size_t> counts;
};

// Equal-width bins over [lo, hi]; the last bin is closed on the right.
Histogram histogram(const std::vector<double>& values, double lo, double hi, std::size_t n_bins);

struct StatsSummary {
  std::size_t count = 0;
  double mean = 0.0;
  double std = 0.0;  // population (1/n)
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  Histogram histogram;
};

// Central moments with 1/n normalization. Throws InsufficientSamples when
// count < 4 and DegenerateData when m₂ = 0.
StatsSummary moment_stats(const std::vector<double>& values, std::size_t n_bins = 100);

std::vector<double> flatten(const std::vector<std::vector<double>>& rows);

struct AttentionScores {
  int layer = 0;
  std::vector<std::vector<double>> subject_rows;  // per prompt, head-averaged
  std::vector<std::vector<double>> control_rows;
};

std::vector<AttentionScores> collect_attention_scores(const ModelBundle& model, const Vocabulary& vocab,
                                                      const std::vector<PromptPair>& pairs, int first_layer,
                                                      int last_layer);

struct LexicalScores {
  double bleu = 0.0;
  double rouge1 = 0.0;
  double rouge2 = 0.0;
  double rouge_l = 0.0;
  std::size_t scored_pairs = 0;
  std::vector<std::size_t> excluded_pairs;  // empty after subject removal
};

// Sentence-level BLEU-4 (uniform weights, brevity penalty, no smoothing).
double bleu(const std::vector<std::string>& reference, const std::vector<std::string>& candidate);
double rouge_n_f1(const std::vector<std::string>& reference, const std::vector<std::string>& candidate, std::size_t n);
double rouge_l_f1(const std::vector<std::string>& reference, const std::vector<std::string>& candidate);

// Removes the subject string (case-insensitive) from both texts, then averages
// per-pair scores with p as reference and p* as candidate.
LexicalScores lexical_similarity(const std::vector<PromptPair>& pairs);

// Per-layer probe: activation statistics of D_s/D_c plus attention rows.
struct LayerProbeReport {
  int layer = 0;
  StatsSummary experimental;
  StatsSummary control;
  Histogram shared_experimental;  // common bins for the CSV
  Histogram shared_control;
};

LayerProbeReport probe_layer(const ModelBundle& model, const Vocabulary& vocab, const std::vector<PromptPair>& pairs,
                             int layer, std::size_t n_bins);

nlohmann::json stats_to_json(const StatsSummary& s);
std::string histogram_csv(const LayerProbeReport& report);

}  // namespace kedit
