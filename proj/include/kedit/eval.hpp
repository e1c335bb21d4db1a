#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "kedit/dataset.hpp"
#include "kedit/model.hpp"
#include "kedit/tokenizer.hpp"

namespace kedit {

// ---- pure scoring primitives --------------------------------------------

// Logits come from a teacher-forced forward over prompt + target[:-1]; target
// token j is predicted at row prompt_len − 1 + j.
double token_accuracy(const Tensor& logits, std::size_t prompt_len, std::span<const int> target);
double mean_target_logprob(const Tensor& logits, std::size_t prompt_len, std::span<const int> target);
// 1 iff o' is the vocabulary argmax at its first position diverging from o and
// at every later position of o' (teacher forced).
bool target_is_argmax(const Tensor& logits, std::size_t prompt_len, std::span<const int> target_new,
                      std::span<const int> target_true);

// n / Σ 1/vᵢ. Throws NonPositiveInput.
double harmonic_score(const std::vector<double>& values);

// 1.96·√(p̂(1−p̂)/n)·100 over per-case proportions in [0, 1].
double proportion_half_width(const std::vector<double>& samples);
// 1.96·s/√n with the n−1 sample deviation, on the samples' own scale.
double mean_half_width(const std::vector<double>& samples);

inline constexpr double kGeBigramWeight = 1.0 / 3.0;
inline constexpr double kGeTrigramWeight = 2.0 / 3.0;

// Shannon entropy (bits) of the empirical n-gram distribution.
double ngram_entropy(const std::vector<std::string>& tokens, std::size_t n);
// (1/3)·H₂ + (2/3)·H₃. Throws TextTooShort for fewer than 3 tokens.
double generation_entropy(const std::vector<std::string>& tokens);

class IdfTable {
 public:
  // idf(t) = ln((1 + N) / (1 + df(t))) + 1 over lowercased unigram documents.
  explicit IdfTable(const std::vector<std::string>& documents);
  double idf(const std::string& term) const;
  std::size_t documents() const noexcept { return n_docs_; }

 private:
  std::size_t n_docs_ = 0;
  std::map<std::string, std::size_t> df_;
};

// 100 × cosine(TF-IDF(generated), TF-IDF(concatenated references)).
double reference_score(const std::string& generated, const std::vector<std::string>& references, const IdfTable& idf);

// ---- suites ---------------------------------------------------------------

struct MetricValue {
  double value = 0.0;
  double ci95 = 0.0;
};

struct CaseRow {
  std::string case_id;
  std::string metric;
  double value = 0.0;
};

struct EditReport {
  std::string suite;  // "zsre" or "counterfacts"
  std::map<std::string, MetricValue> metrics;
  std::vector<CaseRow> cases;
  nlohmann::json config = nlohmann::json::object();
};

// Efficacy, Paraphrase, Specificity (×100) and their harmonic Score.
EditReport zsre_eval(const ModelBundle& model, const Vocabulary& vocab, const std::vector<FactRecord>& records);

// ES, PS, PA, NS (×100) and their Score S = H(ES, PS, NS).
EditReport cf_prob_metrics(const ModelBundle& model, const Vocabulary& vocab, const std::vector<FactRecord>& records);

struct GenerationOptions {
  std::size_t max_new_tokens = 8;
};

// Full Counterfacts suite: probability metrics plus GE and RS over greedy
// generations from every paraphrase prompt.
EditReport counterfacts_eval(const ModelBundle& model, const Vocabulary& vocab, const std::vector<FactRecord>& records,
                             const GenerationOptions& options = {});

inline constexpr int kReportSchemaVersion = 1;
nlohmann::json report_to_json(const EditReport& report);
std::string report_cases_csv(const EditReport& report);

}  // namespace kedit
