#include <cmath>

#include <gtest/gtest.h>

#include "kedit/error.hpp"
#include "kedit/eval.hpp"

using namespace kedit;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no kedit::Error thrown";
  return ErrorCode::kIo;
}

double round2(double x) { return std::round(x * 100.0) / 100.0; }

}  // namespace

// ---- harmonic score -------------------------------------------------------

TEST(HarmonicScore, PublishedRows) {
  EXPECT_EQ(round2(harmonic_score({99.77, 87.88, 24.34})), 48.01);
  EXPECT_EQ(round2(harmonic_score({99.75, 99.08, 81.14})), 92.47);
}

TEST(HarmonicScore, IdentityAndBounds) {
  EXPECT_DOUBLE_EQ(harmonic_score({37.5, 37.5, 37.5}), 37.5);
  const std::vector<double> v = {12.0, 80.0, 55.5};
  const double h = harmonic_score(v);
  EXPECT_GE(h, 12.0);
  EXPECT_LE(h, 80.0);
  EXPECT_NEAR(h, 3.0 / (1.0 / 12.0 + 1.0 / 80.0 + 1.0 / 55.5), 1e-12);
}

TEST(HarmonicScore, NonPositive) {
  EXPECT_EQ(code_of([] { harmonic_score({1.0, 0.0}); }), ErrorCode::kNonPositiveInput);
  EXPECT_EQ(code_of([] { harmonic_score({-1.0}); }), ErrorCode::kNonPositiveInput);
}

// ---- confidence half-widths -----------------------------------------------

TEST(ConfidenceInterval, Proportion) {
  std::vector<double> half(10000);
  for (std::size_t i = 0; i < half.size(); ++i) half[i] = i % 2 == 0 ? 1.0 : 0.0;
  EXPECT_NEAR(proportion_half_width(half), 0.98, 1e-12);
  EXPECT_EQ(proportion_half_width({1.0, 1.0, 1.0}), 0.0);
  EXPECT_EQ(code_of([] { proportion_half_width({1.0}); }), ErrorCode::kInsufficientSamples);
}

TEST(ConfidenceInterval, Mean) {
  EXPECT_EQ(mean_half_width({4.0, 4.0}), 0.0);
  // s = √2 for {1, 3}: 1.96·√2/√2
  EXPECT_NEAR(mean_half_width({1.0, 3.0}), 1.96, 1e-12);
  EXPECT_EQ(code_of([] { mean_half_width({2.0}); }), ErrorCode::kInsufficientSamples);
}

// ---- generation entropy ---------------------------------------------------

TEST(GenerationEntropy, AlternatingBigrams) {
  const std::vector<std::string> t = {"a", "b", "a", "b"};
  const double h2 = -(2.0 / 3.0) * std::log2(2.0 / 3.0) - (1.0 / 3.0) * std::log2(1.0 / 3.0);
  EXPECT_NEAR(ngram_entropy(t, 2), h2, 1e-12);
  EXPECT_NEAR(ngram_entropy(t, 2), 0.9183, 1e-4);
  // Trigrams {aba, bab} are uniform: 1 bit.
  EXPECT_NEAR(ngram_entropy(t, 3), 1.0, 1e-12);
  EXPECT_NEAR(generation_entropy(t), h2 / 3.0 + 2.0 / 3.0, 1e-12);
}

TEST(GenerationEntropy, UniformBigrams) {
  EXPECT_NEAR(ngram_entropy({"a", "b", "c"}, 2), 1.0, 1e-12);
}

TEST(GenerationEntropy, RepeatedTokenIsZero) {
  EXPECT_EQ(generation_entropy({"x", "x", "x", "x", "x"}), 0.0);
}

TEST(GenerationEntropy, TooShort) {
  EXPECT_EQ(code_of([] { generation_entropy({"a", "b"}); }), ErrorCode::kTextTooShort);
}

// ---- reference score ------------------------------------------------------

TEST(ReferenceScore, IdenticalAndDisjoint) {
  const IdfTable idf({"paris is a city", "golf is a sport"});
  EXPECT_NEAR(reference_score("paris is a city", {"paris is a city"}, idf), 100.0, 1e-9);
  EXPECT_EQ(reference_score("golf sport", {"paris city"}, idf), 0.0);
}

TEST(ReferenceScore, HandTfIdf) {
  // One document containing all four terms: every idf is equal, so the
  // generation vector is (1,1,1,1) and the reference vector (1,1,0,0) up to scale.
  const IdfTable idf({"x y z w"});
  EXPECT_NEAR(idf.idf("x"), std::log(2.0 / 2.0) + 1.0, 1e-15);
  EXPECT_NEAR(reference_score("x y z w", {"x y"}, idf), 100.0 * 2.0 / (2.0 * std::sqrt(2.0)), 1e-9);
}

TEST(ReferenceScore, IdfWeighting) {
  // df(x) = 2, df(q) = 1 over N = 2: idf(x) = ln(3/3) + 1 = 1, idf(q) = ln(3/2) + 1.
  const IdfTable idf({"x q", "x"});
  const double iq = std::log(1.5) + 1.0;
  EXPECT_NEAR(idf.idf("q"), iq, 1e-15);
  // gen = (x:1, q:iq), ref = (x:1): cosine = 1/√(1 + iq²).
  EXPECT_NEAR(reference_score("x q", {"x"}, idf), 100.0 / std::sqrt(1.0 + iq * iq), 1e-9);
}

TEST(ReferenceScore, EmptyReference) {
  const IdfTable idf({"a"});
  EXPECT_EQ(code_of([&] { reference_score("a", {""}, idf); }), ErrorCode::kEmptyReference);
}

// ---- token-level primitives on hand logits ---------------------------------

TEST(TokenAccuracy, OneOfTwoCorrect) {
  // Prompt of 2 tokens, 2 target tokens: rows 1 and 2 predict them.
  const Tensor logits = Tensor::matrix(3, 4,
                                       {0, 0, 0, 0,    //
                                        0, 5, 1, 0,    // predicts 1
                                        0, 0, 1, 4});  // predicts 3
  const std::vector<int> target = {1, 2};
  EXPECT_EQ(100.0 * token_accuracy(logits, 2, target), 50.0);
}

TEST(TokenAccuracy, RowsMustCoverTarget) {
  const Tensor logits = Tensor::matrix(2, 2, {0, 0, 0, 0});
  const std::vector<int> target = {1, 1, 1};
  EXPECT_EQ(code_of([&] { token_accuracy(logits, 2, target); }), ErrorCode::kDimensionMismatch);
}

TEST(TargetLogprob, LengthNormalized) {
  const Tensor logits = Tensor::matrix(2, 2, {0, std::log(3.0), std::log(3.0), 0});
  // P(1|row0) = 3/4, P(0|row1) = 3/4
  const std::vector<int> target = {1, 0};
  EXPECT_NEAR(mean_target_logprob(logits, 1, target), std::log(0.75), 1e-15);
}

TEST(TargetIsArgmax, FirstDivergentPositionOnward) {
  const std::vector<int> o_true = {1, 2};
  const std::vector<int> o_new = {1, 3};
  // Row 0 prefers 2 (irrelevant: shared first token), row 1 prefers 3.
  const Tensor yes = Tensor::matrix(2, 4, {0, 0, 9, 0, 0, 0, 0, 9});
  const Tensor no = Tensor::matrix(2, 4, {0, 9, 0, 0, 0, 0, 9, 0});
  EXPECT_TRUE(target_is_argmax(yes, 1, o_new, o_true));
  EXPECT_FALSE(target_is_argmax(no, 1, o_new, o_true));
  // Paraphrase A gives yes, paraphrase B gives no: PA contribution 50.
  const double pa = 0.5 * (target_is_argmax(yes, 1, o_new, o_true) + target_is_argmax(no, 1, o_new, o_true));
  EXPECT_EQ(100.0 * pa, 50.0);
}

// ---- suites on a constant-output model --------------------------------------

namespace {

// A model whose logits are the same at every position: final gain 0 and a
// final bias selecting one row of the unembedding that favours `winner`.
struct ConstantModel {
  Vocabulary vocab;
  ModelBundle model;
  int winner = 0;

  explicit ConstantModel(const std::string& winning_word) {
    vocab = Vocabulary::build(std::vector<std::string>{"alpha beta gamma plays golf chess in rome paris"});
    ModelConfig c = make_config(static_cast<int>(vocab.size()));
    c.n_layers = 1;
    c.d_model = 8;
    c.d_ffn = 8;
    c.n_heads = 2;
    model = init_model(c);
    winner = vocab.id(winning_word);
    for (double& v : model.weights.final_gain.data()) v = 0.0;
    for (double& v : model.weights.final_bias.data()) v = 0.0;
    model.weights.final_bias[0] = 1.0;
    for (double& v : model.weights.unembedding.data()) v = 0.0;
    model.weights.unembedding.at(0, static_cast<std::size_t>(winner)) = 3.0;
  }
};

FactRecord make_case(const std::string& id, const std::string& target_new, const std::string& target_true,
                     const std::string& neighbor_expected) {
  FactRecord r;
  r.case_id = id;
  r.subject = "alpha beta";
  r.relation = "sport";
  r.target_new = target_new;
  r.target_true = target_true;
  r.edit_prompt = "alpha beta plays";
  r.paraphrase_prompts = {"alpha beta plays in", "gamma alpha beta plays"};
  r.neighborhood_prompts = {{"gamma plays", "gamma", neighbor_expected}};
  r.reference_texts = {"golf in rome"};
  return r;
}

}  // namespace

TEST(Suites, ModelEmittingEveryTargetScoresPerfectly) {
  const ConstantModel cm("golf");
  const auto r = zsre_eval(cm.model, cm.vocab, {make_case("0", "golf", "chess", "golf")});
  EXPECT_EQ(r.metrics.at("Efficacy").value, 100.0);
  EXPECT_EQ(r.metrics.at("Paraphrase").value, 100.0);
  EXPECT_EQ(r.metrics.at("Specificity").value, 100.0);
  EXPECT_EQ(r.metrics.at("Score").value, 100.0);
}

TEST(Suites, CounterfactualIndicatorsAndStrictTies) {
  const ConstantModel cm("golf");
  // o' = golf is the model's favourite: ES, PS, PA = 1. The neighbour expects
  // golf as well, so P(true) = P(o') exactly and NS scores 0.
  const auto tie = cf_prob_metrics(cm.model, cm.vocab, {make_case("0", "golf", "chess", "golf")});
  EXPECT_EQ(tie.metrics.at("ES").value, 100.0);
  EXPECT_EQ(tie.metrics.at("PS").value, 100.0);
  EXPECT_EQ(tie.metrics.at("PA").value, 100.0);
  EXPECT_EQ(tie.metrics.at("NS").value, 0.0);
  EXPECT_EQ(tie.metrics.at("S").value, 0.0);

  // o' = chess and o = rome both lose to golf and tie with each other: ES 0.
  const auto lose = cf_prob_metrics(cm.model, cm.vocab, {make_case("1", "chess", "rome", "golf")});
  EXPECT_EQ(lose.metrics.at("ES").value, 0.0);
  EXPECT_EQ(lose.metrics.at("PA").value, 0.0);
  EXPECT_EQ(lose.metrics.at("NS").value, 100.0);
}

TEST(Suites, EmptyEvaluationSet) {
  const ConstantModel cm("golf");
  EXPECT_EQ(code_of([&] { zsre_eval(cm.model, cm.vocab, {}); }), ErrorCode::kEmptyEvaluationSet);
  FactRecord bare = make_case("0", "golf", "chess", "golf");
  bare.paraphrase_prompts.clear();
  EXPECT_EQ(code_of([&] { cf_prob_metrics(cm.model, cm.vocab, {bare}); }), ErrorCode::kEmptyEvaluationSet);
}

TEST(Suites, CounterfactsReportInvariants) {
  const ConstantModel cm("golf");
  const std::vector<FactRecord> recs = {make_case("a", "golf", "chess", "rome"), make_case("b", "chess", "golf", "golf")};
  const auto r = counterfacts_eval(cm.model, cm.vocab, recs, {4});
  for (const char* m : {"ES", "PS", "PA", "NS", "RS"}) {
    EXPECT_GE(r.metrics.at(m).value, 0.0) << m;
    EXPECT_LE(r.metrics.at(m).value, 100.0) << m;
    EXPECT_GE(r.metrics.at(m).ci95, 0.0) << m;
  }
  EXPECT_GE(r.metrics.at("GE").value, 0.0);
  const double es = r.metrics.at("ES").value, ps = r.metrics.at("PS").value, ns = r.metrics.at("NS").value;
  if (es > 0 && ps > 0 && ns > 0) EXPECT_NEAR(r.metrics.at("S").value, harmonic_score({es, ps, ns}), 1e-9);
  // Metric functions are pure.
  EXPECT_EQ(report_to_json(r).dump(), report_to_json(counterfacts_eval(cm.model, cm.vocab, recs, {4})).dump());
}

TEST(Report, JsonAndCsvLayout) {
  EditReport r;
  r.suite = "zsre";
  r.metrics["Efficacy"] = {50.0, 1.5};
  r.cases = {{"c1", "Efficacy", 100.0}, {"c2", "Efficacy", 0.0}};
  const auto j = report_to_json(r);
  EXPECT_EQ(j.at("schema_version"), kReportSchemaVersion);
  EXPECT_EQ(j.at("metrics").at("Efficacy").at("ci95"), 1.5);
  EXPECT_EQ(j.at("metadata").at("ge_weights").at("trigram"), kGeTrigramWeight);
  EXPECT_EQ(report_cases_csv(r), "case_id,metric,value\nc1,Efficacy,100\nc2,Efficacy,0\n");
}
