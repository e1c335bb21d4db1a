#include "kedit/probe.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "kedit/error.hpp"

namespace kedit {

InstrumentedPrompt instrument_prompt(const Vocabulary& vocab, const std::string& prompt, const std::string& subject) {
  const auto tokens = vocab.tokenize(prompt);
  const SubjectSpan span = find_subject_span(tokens, vocab.tokenize(subject));
  InstrumentedPrompt out;
  out.tokens.assign(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(span.start));
  out.tokens.push_back(Vocabulary::kControl);
  out.tokens.insert(out.tokens.end(), tokens.begin() + static_cast<std::ptrdiff_t>(span.start), tokens.end());
  out.control_position = span.start;
  out.subject_last = span.end + 1;
  return out;
}

namespace {

std::vector<InstrumentedPrompt> instrument_pair(const Vocabulary& vocab, const PromptPair& pair, std::size_t index) {
  try {
    return {instrument_prompt(vocab, pair.original, pair.subject), instrument_prompt(vocab, pair.paraphrase, pair.subject)};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kSubjectNotFound) {
      throw Error(ErrorCode::kSubjectNotFound, "pair " + std::to_string(index) + ": subject '" + pair.subject + "'");
    }
    throw;
  }
}

}  // namespace

ProbeSets collect_activation_sets(const ModelBundle& model, const Vocabulary& vocab,
                                  const std::vector<PromptPair>& pairs, int layer) {
  ProbeSets sets;
  sets.layer = layer;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (const auto& ip : instrument_pair(vocab, pairs[i], i)) {
      const Intervention read = Intervention::read_act(layer, {ip.subject_last, ip.control_position});
      const ForwardTrace trace = forward(model, ip.tokens, {&read, 1});
      sets.experimental.push_back(trace.activations.at(0));
      sets.control.push_back(trace.activations.at(1));
    }
  }
  return sets;
}

ProbeSets diff_sets(ProbeSets probe) {
  auto diff = [](const std::vector<ActivationSample>& h) {
    if (h.size() % 2 != 0) throw Error(ErrorCode::kLengthMismatch, "activation set is not pair-matched");
    std::vector<std::vector<double>> out;
    for (std::size_t i = 0; i < h.size(); i += 2) {
      const auto& p = h[i].values;
      const auto& ps = h[i + 1].values;
      if (p.size() != ps.size()) throw Error(ErrorCode::kLengthMismatch, "activation lengths differ within a pair");
      std::vector<double> d(p.size());
      for (std::size_t j = 0; j < p.size(); ++j) d[j] = ps[j] - p[j];
      out.push_back(std::move(d));
    }
    return out;
  };
  if (probe.experimental.size() != probe.control.size()) {
    throw Error(ErrorCode::kLengthMismatch, "experimental and control sets differ in size");
  }
  probe.diff_experimental = diff(probe.experimental);
  probe.diff_control = diff(probe.control);
  return probe;
}

Histogram histogram(const std::vector<double>& values, double lo, double hi, std::size_t n_bins) {
  if (n_bins == 0) throw Error(ErrorCode::kInvalidArgument, "histogram needs at least one bin");
  if (!(hi > lo)) {
    // Widen a degenerate range so the edges stay strictly increasing.
    lo -= 0.5;
    hi += 0.5;
  }
  Histogram h;
  h.edges.resize(n_bins + 1);
  const double width = (hi - lo) / static_cast<double>(n_bins);
  for (std::size_t i = 0; i <= n_bins; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges.back() = hi;
  h.counts.assign(n_bins, 0);
  for (double v : values) {
    auto bin = static_cast<std::ptrdiff_t>(std::floor((v - lo) / width));
    bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(n_bins) - 1);
    ++h.counts[static_cast<std::size_t>(bin)];
  }
  return h;
}

StatsSummary moment_stats(const std::vector<double>& values, std::size_t n_bins) {
  if (values.size() < 4) throw Error(ErrorCode::kInsufficientSamples, "moment statistics need at least 4 values");
  StatsSummary s;
  s.count = values.size();
  const double n = static_cast<double>(values.size());
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : values) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 == 0.0) throw Error(ErrorCode::kDegenerateData, "zero variance");
  s.mean = mean;
  s.std = std::sqrt(m2);
  s.skewness = m3 / std::pow(m2, 1.5);
  s.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  s.histogram = histogram(values, *mn, *mx, n_bins);
  return s;
}

std::vector<double> flatten(const std::vector<std::vector<double>>& rows) {
  std::vector<double> out;
  for (const auto& r : rows) out.insert(out.end(), r.begin(), r.end());
  return out;
}

std::vector<AttentionScores> collect_attention_scores(const ModelBundle& model, const Vocabulary& vocab,
                                                      const std::vector<PromptPair>& pairs, int first_layer,
                                                      int last_layer) {
  if (first_layer < 1 || last_layer > model.config.n_layers || first_layer > last_layer) {
    throw Error(ErrorCode::kLayerOutOfRange, "attention layer range");
  }
  std::vector<AttentionScores> out;
  for (int l = first_layer; l <= last_layer; ++l) out.push_back({l, {}, {}});
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    for (const auto& ip : instrument_pair(vocab, pairs[i], i)) {
      std::vector<Intervention> reads;
      for (int l = first_layer; l <= last_layer; ++l) {
        reads.push_back(Intervention::read_attn(l, {ip.subject_last, ip.control_position}));
      }
      const ForwardTrace trace = forward(model, ip.tokens, reads);
      for (const auto& row : trace.attention) {
        auto& bucket = out[static_cast<std::size_t>(row.layer - first_layer)];
        (row.position == ip.subject_last ? bucket.subject_rows : bucket.control_rows).push_back(row.weights);
      }
    }
  }
  return out;
}

namespace {

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngram_counts(const std::vector<std::string>& tokens, std::size_t n) {
  Counts c;
  if (tokens.size() < n) return c;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++c[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                 tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return c;
}

std::size_t clipped_overlap(const Counts& ref, const Counts& cand) {
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    const auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  return overlap;
}

double f1(double overlap, double cand_total, double ref_total) {
  if (overlap == 0.0 || cand_total == 0.0 || ref_total == 0.0) return 0.0;
  const double p = overlap / cand_total;
  const double r = overlap / ref_total;
  return 2.0 * p * r / (p + r);
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string remove_all(std::string text, const std::string& needle) {
  if (needle.empty()) return text;
  for (std::size_t pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos)) {
    text.erase(pos, needle.size());
  }
  return text;
}

}  // namespace

double bleu(const std::vector<std::string>& reference, const std::vector<std::string>& candidate) {
  if (candidate.empty() || reference.empty()) return 0.0;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const Counts cand = ngram_counts(candidate, n);
    std::size_t total = 0;
    for (const auto& [g, c] : cand) total += c;
    const std::size_t overlap = clipped_overlap(ngram_counts(reference, n), cand);
    if (overlap == 0 || total == 0) return 0.0;
    log_sum += 0.25 * std::log(static_cast<double>(overlap) / static_cast<double>(total));
  }
  const double c = static_cast<double>(candidate.size());
  const double r = static_cast<double>(reference.size());
  const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);
  return bp * std::exp(log_sum);
}

double rouge_n_f1(const std::vector<std::string>& reference, const std::vector<std::string>& candidate, std::size_t n) {
  const Counts ref = ngram_counts(reference, n);
  const Counts cand = ngram_counts(candidate, n);
  const double ref_total = reference.size() >= n ? static_cast<double>(reference.size() - n + 1) : 0.0;
  const double cand_total = candidate.size() >= n ? static_cast<double>(candidate.size() - n + 1) : 0.0;
  return f1(static_cast<double>(clipped_overlap(ref, cand)), cand_total, ref_total);
}

double rouge_l_f1(const std::vector<std::string>& reference, const std::vector<std::string>& candidate) {
  const std::size_t m = reference.size(), n = candidate.size();
  std::vector<std::vector<std::size_t>> lcs(m + 1, std::vector<std::size_t>(n + 1, 0));
  for (std::size_t i = 1; i <= m; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      lcs[i][j] = reference[i - 1] == candidate[j - 1] ? lcs[i - 1][j - 1] + 1 : std::max(lcs[i - 1][j], lcs[i][j - 1]);
    }
  }
  return f1(static_cast<double>(lcs[m][n]), static_cast<double>(n), static_cast<double>(m));
}

LexicalScores lexical_similarity(const std::vector<PromptPair>& pairs) {
  if (pairs.empty()) throw Error(ErrorCode::kEmptyInput, "no pairs to score");
  LexicalScores s;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string subject = lower(pairs[i].subject);
    const auto ref = split_words(remove_all(lower(pairs[i].original), subject));
    const auto cand = split_words(remove_all(lower(pairs[i].paraphrase), subject));
    if (ref.empty() || cand.empty()) {
      s.excluded_pairs.push_back(i);
      continue;
    }
    s.bleu += bleu(ref, cand);
    s.rouge1 += rouge_n_f1(ref, cand, 1);
    s.rouge2 += rouge_n_f1(ref, cand, 2);
    s.rouge_l += rouge_l_f1(ref, cand);
    ++s.scored_pairs;
  }
  if (s.scored_pairs > 0) {
    const double n = static_cast<double>(s.scored_pairs);
    s.bleu /= n;
    s.rouge1 /= n;
    s.rouge2 /= n;
    s.rouge_l /= n;
  }
  return s;
}

LayerProbeReport probe_layer(const ModelBundle& model, const Vocabulary& vocab, const std::vector<PromptPair>& pairs,
                             int layer, std::size_t n_bins) {
  const ProbeSets sets = diff_sets(collect_activation_sets(model, vocab, pairs, layer));
  const auto ds = flatten(sets.diff_experimental);
  const auto dc = flatten(sets.diff_control);
  LayerProbeReport r;
  r.layer = layer;
  r.experimental = moment_stats(ds, n_bins);
  r.control = moment_stats(dc, n_bins);
  const double lo = std::min(*std::min_element(ds.begin(), ds.end()), *std::min_element(dc.begin(), dc.end()));
  const double hi = std::max(*std::max_element(ds.begin(), ds.end()), *std::max_element(dc.begin(), dc.end()));
  r.shared_experimental = histogram(ds, lo, hi, n_bins);
  r.shared_control = histogram(dc, lo, hi, n_bins);
  return r;
}

nlohmann::json stats_to_json(const StatsSummary& s) {
  return nlohmann::json{{"count", s.count},
                        {"mean", s.mean},
                        {"std", s.std},
                        {"skewness", s.skewness},
                        {"excess_kurtosis", s.excess_kurtosis},
                        {"histogram", {{"bin_edges", s.histogram.edges}, {"counts", s.histogram.counts}}}};
}

std::string histogram_csv(const LayerProbeReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "bin_left,bin_right,count_experimental,count_control\n";
  const auto& e = report.shared_experimental.edges;
  for (std::size_t i = 0; i + 1 < e.size(); ++i) {
    os << e[i] << ',' << e[i + 1] << ',' << report.shared_experimental.counts[i] << ','
       << report.shared_control.counts[i] << '\n';
  }
  return os.str();
}

}  // namespace kedit
