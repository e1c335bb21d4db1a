#include "kedit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kedit/autodiff.hpp"
#include "kedit/error.hpp"

namespace kedit {

namespace {

void check_rows(const Tensor& logits, std::size_t prompt_len, std::size_t target_len) {
  if (prompt_len == 0 || target_len == 0 || prompt_len - 1 + target_len > logits.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "logits do not cover the target positions");
  }
}

std::size_t argmax(std::span<const double> row) {
  return static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
}

}  // namespace

double token_accuracy(const Tensor& logits, std::size_t prompt_len, std::span<const int> target) {
  check_rows(logits, prompt_len, target.size());
  std::size_t correct = 0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    if (argmax(logits.row(prompt_len - 1 + j)) == static_cast<std::size_t>(target[j])) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(target.size());
}

double mean_target_logprob(const Tensor& logits, std::size_t prompt_len, std::span<const int> target) {
  check_rows(logits, prompt_len, target.size());
  double total = 0.0;
  for (std::size_t j = 0; j < target.size(); ++j) {
    const auto row = logits.row(prompt_len - 1 + j);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double x : row) z += std::exp(x - mx);
    total += row[static_cast<std::size_t>(target[j])] - mx - std::log(z);
  }
  return total / static_cast<double>(target.size());
}

bool target_is_argmax(const Tensor& logits, std::size_t prompt_len, std::span<const int> target_new,
                      std::span<const int> target_true) {
  check_rows(logits, prompt_len, target_new.size());
  std::size_t first = 0;
  while (first < target_new.size() && first < target_true.size() && target_new[first] == target_true[first]) ++first;
  if (first == target_new.size()) return false;  // o' is a prefix of o: never strictly preferred
  for (std::size_t j = first; j < target_new.size(); ++j) {
    if (argmax(logits.row(prompt_len - 1 + j)) != static_cast<std::size_t>(target_new[j])) return false;
  }
  return true;
}

double harmonic_score(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::kNonPositiveInput, "no values");
  double inv = 0.0;
  for (double v : values) {
    if (!(v > 0.0)) throw Error(ErrorCode::kNonPositiveInput, "harmonic mean needs positive values");
    inv += 1.0 / v;
  }
  return static_cast<double>(values.size()) / inv;
}

double proportion_half_width(const std::vector<double>& samples) {
  if (samples.size() < 2) throw Error(ErrorCode::kInsufficientSamples, "need at least 2 samples");
  double p = 0.0;
  for (double s : samples) p += s;
  p /= static_cast<double>(samples.size());
  return 100.0 * 1.96 * std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(samples.size()));
}

double mean_half_width(const std::vector<double>& samples) {
  if (samples.size() < 2) throw Error(ErrorCode::kInsufficientSamples, "need at least 2 samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double var = 0.0;
  for (double s : samples) var += (s - mean) * (s - mean);
  var /= n - 1.0;
  return 1.96 * std::sqrt(var / n);
}

double ngram_entropy(const std::vector<std::string>& tokens, std::size_t n) {
  if (tokens.size() < n) return 0.0;
  std::map<std::vector<std::string>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  const double total = static_cast<double>(tokens.size() - n + 1);
  double h = 0.0;
  for (const auto& [gram, c] : counts) {
    const double p = static_cast<double>(c) / total;
    h -= p * std::log2(p);
  }
  return h;
}

double generation_entropy(const std::vector<std::string>& tokens) {
  if (tokens.size() < 3) throw Error(ErrorCode::kTextTooShort, "generation entropy needs at least 3 tokens");
  return kGeBigramWeight * ngram_entropy(tokens, 2) + kGeTrigramWeight * ngram_entropy(tokens, 3);
}

IdfTable::IdfTable(const std::vector<std::string>& documents) : n_docs_(documents.size()) {
  for (const auto& doc : documents) {
    auto words = split_words(doc);
    std::sort(words.begin(), words.end());
    words.erase(std::unique(words.begin(), words.end()), words.end());
    for (const auto& w : words) ++df_[w];
  }
}

double IdfTable::idf(const std::string& term) const {
  const auto it = df_.find(term);
  const double df = it == df_.end() ? 0.0 : static_cast<double>(it->second);
  return std::log((1.0 + static_cast<double>(n_docs_)) / (1.0 + df)) + 1.0;
}

namespace {

std::map<std::string, double> tfidf(const std::string& text, const IdfTable& idf) {
  std::map<std::string, double> v;
  for (const auto& w : split_words(text)) v[w] += 1.0;
  for (auto& [w, x] : v) x *= idf.idf(w);
  return v;
}

}  // namespace

double reference_score(const std::string& generated, const std::vector<std::string>& references, const IdfTable& idf) {
  std::string joined;
  for (const auto& r : references) joined += r + " ";
  if (split_words(joined).empty()) throw Error(ErrorCode::kEmptyReference, "no reference text");
  if (split_words(generated).empty()) throw Error(ErrorCode::kEmptyInput, "empty generation");
  const auto a = tfidf(generated, idf);
  const auto b = tfidf(joined, idf);
  double dot_ab = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [w, x] : a) {
    na += x * x;
    const auto it = b.find(w);
    if (it != b.end()) dot_ab += x * it->second;
  }
  for (const auto& [w, x] : b) nb += x * x;
  return std::clamp(100.0 * dot_ab / std::sqrt(na * nb), 0.0, 100.0);
}

namespace {

struct Scored {
  std::vector<int> prompt;
  Tensor logits;
};

Scored teacher_force(const ModelBundle& model, const Vocabulary& vocab, const std::string& prompt,
                     const std::vector<int>& target) {
  Scored s;
  s.prompt = vocab.tokenize(prompt);
  std::vector<int> input = s.prompt;
  input.insert(input.end(), target.begin(), target.end() - 1);
  s.logits = forward(model, input).logits;
  return s;
}

void require_records(const std::vector<FactRecord>& records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyEvaluationSet, "no records");
  for (const auto& r : records) {
    if (r.paraphrase_prompts.empty() || r.neighborhood_prompts.empty()) {
      throw Error(ErrorCode::kEmptyEvaluationSet, r.case_id + " lacks paraphrase or neighborhood prompts");
    }
  }
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

// Harmonic mean that collapses to 0 when a constituent is 0.
double score_of(const std::vector<double>& values) {
  for (double v : values) {
    if (v <= 0.0) return 0.0;
  }
  return harmonic_score(values);
}

void add_rate(EditReport& report, const std::string& name, const std::vector<double>& per_case,
              const std::vector<FactRecord>& records) {
  MetricValue m;
  m.value = 100.0 * mean(per_case);
  m.ci95 = per_case.size() >= 2 ? proportion_half_width(per_case) : 0.0;
  report.metrics[name] = m;
  for (std::size_t i = 0; i < records.size(); ++i) report.cases.push_back({records[i].case_id, name, 100.0 * per_case[i]});
}

}  // namespace

EditReport zsre_eval(const ModelBundle& model, const Vocabulary& vocab, const std::vector<FactRecord>& records) {
  require_records(records);
  std::vector<double> efficacy, paraphrase, specificity;
  for (const auto& r : records) {
    const auto target = vocab.tokenize(r.target_new);
    const Scored edit = teacher_force(model, vocab, r.edit_prompt, target);
    efficacy.push_back(token_accuracy(edit.logits, edit.prompt.size(), target));

    std::vector<double> para;
    for (const auto& p : r.paraphrase_prompts) {
      const Scored s = teacher_force(model, vocab, p, target);
      para.push_back(token_accuracy(s.logits, s.prompt.size(), target));
    }
    paraphrase.push_back(mean(para));

    std::vector<double> spec;
    for (const auto& n : r.neighborhood_prompts) {
      const auto expected = vocab.tokenize(n.expected);
      const Scored s = teacher_force(model, vocab, n.prompt, expected);
      spec.push_back(token_accuracy(s.logits, s.prompt.size(), expected));
    }
    specificity.push_back(mean(spec));
  }
  EditReport report;
  report.suite = "zsre";
  add_rate(report, "Efficacy", efficacy, records);
  add_rate(report, "Paraphrase", paraphrase, records);
  add_rate(report, "Specificity", specificity, records);
  report.metrics["Score"] = {score_of({report.metrics["Efficacy"].value, report.metrics["Paraphrase"].value,
                                       report.metrics["Specificity"].value}),
                             0.0};
  return report;
}

EditReport cf_prob_metrics(const ModelBundle& model, const Vocabulary& vocab, const std::vector<FactRecord>& records) {
  require_records(records);
  std::vector<double> es, ps, pa, ns;
  for (const auto& r : records) {
    const auto o_new = vocab.tokenize(r.target_new);
    const auto o_true = vocab.tokenize(r.target_true);
    auto prefers_new = [&](const std::string& prompt) {
      const Scored a = teacher_force(model, vocab, prompt, o_new);
      const Scored b = teacher_force(model, vocab, prompt, o_true);
      return mean_target_logprob(a.logits, a.prompt.size(), o_new) >
             mean_target_logprob(b.logits, b.prompt.size(), o_true);
    };
    es.push_back(prefers_new(r.edit_prompt) ? 1.0 : 0.0);

    std::vector<double> ps_case, pa_case;
    for (const auto& p : r.paraphrase_prompts) {
      ps_case.push_back(prefers_new(p) ? 1.0 : 0.0);
      const Scored s = teacher_force(model, vocab, p, o_new);
      pa_case.push_back(target_is_argmax(s.logits, s.prompt.size(), o_new, o_true) ? 1.0 : 0.0);
    }
    ps.push_back(mean(ps_case));
    pa.push_back(mean(pa_case));

    std::vector<double> ns_case;
    for (const auto& n : r.neighborhood_prompts) {
      const auto expected = vocab.tokenize(n.expected);
      const Scored t = teacher_force(model, vocab, n.prompt, expected);
      const Scored c = teacher_force(model, vocab, n.prompt, o_new);
      ns_case.push_back(mean_target_logprob(t.logits, t.prompt.size(), expected) >
                                mean_target_logprob(c.logits, c.prompt.size(), o_new)
                            ? 1.0
                            : 0.0);
    }
    ns.push_back(mean(ns_case));
  }
  EditReport report;
  report.suite = "counterfacts";
  add_rate(report, "ES", es, records);
  add_rate(report, "PS", ps, records);
  add_rate(report, "PA", pa, records);
  add_rate(report, "NS", ns, records);
  report.metrics["S"] = {score_of({report.metrics["ES"].value, report.metrics["PS"].value, report.metrics["NS"].value}),
                         0.0};
  return report;
}

EditReport counterfacts_eval(const ModelBundle& model, const Vocabulary& vocab, const std::vector<FactRecord>& records,
                             const GenerationOptions& options) {
  EditReport report = cf_prob_metrics(model, vocab, records);

  std::vector<std::vector<std::string>> generations(records.size());
  std::vector<std::string> documents;
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::string joined;
    for (const auto& p : records[i].paraphrase_prompts) {
      const auto prompt = vocab.tokenize(p);
      auto tokens = prompt;
      const auto cont = generate(model, prompt, options.max_new_tokens, Decoding::greedy());
      tokens.insert(tokens.end(), cont.begin(), cont.end());
      generations[i].push_back(vocab.detokenize(tokens));
      joined += generations[i].back() + " ";
    }
    documents.push_back(joined);
    std::string refs;
    for (const auto& t : records[i].reference_texts) refs += t + " ";
    documents.push_back(refs);
  }
  const IdfTable idf(documents);

  std::vector<double> ge, rs;
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::vector<double> ge_case;
    for (const auto& g : generations[i]) ge_case.push_back(generation_entropy(split_words(g)));
    ge.push_back(mean(ge_case));
    rs.push_back(reference_score(documents[2 * i], records[i].reference_texts, idf));
  }
  report.metrics["GE"] = {mean(ge), ge.size() >= 2 ? mean_half_width(ge) : 0.0};
  report.metrics["RS"] = {mean(rs), rs.size() >= 2 ? mean_half_width(rs) : 0.0};
  for (std::size_t i = 0; i < records.size(); ++i) {
    report.cases.push_back({records[i].case_id, "GE", ge[i]});
    report.cases.push_back({records[i].case_id, "RS", rs[i]});
  }
  return report;
}

nlohmann::json report_to_json(const EditReport& report) {
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, m] : report.metrics) metrics[name] = {{"value", m.value}, {"ci95", m.ci95}};
  nlohmann::json cases = nlohmann::json::array();
  for (const auto& c : report.cases) cases.push_back({{"case_id", c.case_id}, {"metric", c.metric}, {"value", c.value}});
  return nlohmann::json{{"schema_version", kReportSchemaVersion},
                        {"suite", report.suite},
                        {"metrics", metrics},
                        {"cases", cases},
                        {"config", report.config},
                        {"metadata",
                         {{"scale", "rates on 0-100, GE in bits"},
                          {"ci", "95% normal-approximation half-width"},
                          {"ge_weights", {{"bigram", kGeBigramWeight}, {"trigram", kGeTrigramWeight}}},
                          {"sequence_probability", "length-normalized log-probability"},
                          {"ties", "strict inequality, ties score 0"}}}};
}

std::string report_cases_csv(const EditReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "case_id,metric,value\n";
  for (const auto& c : report.cases) os << c.case_id << ',' << c.metric << ',' << c.value << '\n';
  return os.str();
}

}  // namespace kedit
