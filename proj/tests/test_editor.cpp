#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "kedit/checkpoint.hpp"
#include "kedit/dataset.hpp"
#include "kedit/editor.hpp"
#include "kedit/error.hpp"
#include "kedit/linalg.hpp"

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

FactRecord record(std::string id, std::string s, std::string r, std::string o_new) {
  FactRecord f;
  f.case_id = std::move(id);
  f.subject = std::move(s);
  f.relation = std::move(r);
  f.target_true = "x";
  f.target_new = std::move(o_new);
  return f;
}

Tensor random_tensor(RngStream& rng, std::vector<std::size_t> shape) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.symmetric();
  return t;
}

// Untrained seeded 4-layer model over a small synthetic dataset.
class EditFixture : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    SyntheticOptions o;
    o.n_subjects = 6;
    o.seed = 4;
    records_ = new std::vector<FactRecord>(gen_synthetic_dataset(o));
    vocab_ = new Vocabulary(Vocabulary::build(training_texts(*records_)));
    ModelConfig c = make_config(static_cast<int>(vocab_->size()));
    c.seed = 4;
    model_ = new ModelBundle(init_model(c));
  }
  static void TearDownTestSuite() {
    delete records_;
    delete vocab_;
    delete model_;
  }

  const std::vector<FactRecord>& records() const { return *records_; }
  const Vocabulary& vocab() const { return *vocab_; }
  const ModelBundle& model() const { return *model_; }

  std::vector<std::vector<int>> corpus() const {
    std::vector<std::vector<int>> out;
    for (const auto& t : training_texts(records())) out.push_back(vocab().tokenize(t));
    return out;
  }

  EditBatch batch_of(std::initializer_list<std::size_t> idx, std::uint64_t seed = 11) const {
    EditBatch b;
    b.master_seed = seed;
    for (std::size_t i : idx) b.records.push_back(records()[i]);
    return b;
  }

  static std::vector<FactRecord>* records_;
  static Vocabulary* vocab_;
  static ModelBundle* model_;
};

std::vector<FactRecord>* EditFixture::records_ = nullptr;
Vocabulary* EditFixture::vocab_ = nullptr;
ModelBundle* EditFixture::model_ = nullptr;

}  // namespace

// ---- batch validation -----------------------------------------------------

TEST(ValidateBatch, EmptyIsOk) { EXPECT_TRUE(validate_batch({}).ok()); }

TEST(ValidateBatch, SameTargetIsOk) {
  EditBatch b{{record("a", "leo", "sport", "golf"), record("b", "leo", "sport", "golf")}, 0};
  EXPECT_TRUE(validate_batch(b).ok());
}

TEST(ValidateBatch, DifferentTargetIsConflict) {
  EditBatch b{{record("a", "leo", "sport", "golf"), record("b", "leo", "sport", "chess"),
               record("c", "leo", "city", "rome")},
              0};
  const ConflictReport r = validate_batch(b);
  ASSERT_EQ(r.conflicts.size(), 1u);
  EXPECT_EQ(r.conflicts[0].case_a, "a");
  EXPECT_EQ(r.conflicts[0].case_b, "b");
  EXPECT_NE(r.describe().find("a"), std::string::npos);
}

// ---- noise policies -------------------------------------------------------

TEST(NoisePolicy, DneDeepGaussianAtSubject) {
  const NoisePolicy p = build_noise_policy(NoiseVariant::kDNE, 0.5);
  EXPECT_EQ(p.distribution, NoiseDistribution::kGaussian);
  EXPECT_EQ(p.layer_range, LayerRange::kDeep);
  EXPECT_EQ(p.position_rule, PositionRule::kLastSubject);
  EXPECT_EQ(p.target, NoiseTarget::kFfnActivation);
  EXPECT_EQ(p.layers(2), (std::vector<int>{1, 2}));
}

TEST(NoisePolicy, SneDiffersOnlyInLayerRange) {
  NoisePolicy sne = build_noise_policy(NoiseVariant::kSNE, 0.5);
  EXPECT_EQ(sne.layers(2), std::vector<int>{2});
  NoisePolicy dne = build_noise_policy(NoiseVariant::kDNE, 0.5);
  EXPECT_EQ(sne.layer_range, LayerRange::kShallow);
  sne.layer_range = dne.layer_range;
  sne.variant = dne.variant;
  EXPECT_EQ(sne, dne);
}

TEST(NoisePolicy, Ablations) {
  EXPECT_EQ(build_noise_policy(NoiseVariant::kUN, 0.3).distribution, NoiseDistribution::kUniform);
  EXPECT_EQ(build_noise_policy(NoiseVariant::kRNP, 0.3).position_rule, PositionRule::kRandomToken);
  const NoisePolicy nt = build_noise_policy(NoiseVariant::kNT, 0.3);
  EXPECT_EQ(nt.distribution, NoiseDistribution::kUniform);
  EXPECT_EQ(nt.target, NoiseTarget::kParameters);
  const NoisePolicy ne = build_noise_policy(NoiseVariant::kNE, 0.3);
  EXPECT_EQ(ne.distribution, NoiseDistribution::kUniform);
  EXPECT_EQ(ne.target, NoiseTarget::kEmbeddings);
  EXPECT_TRUE(build_noise_policy(NoiseVariant::kNone, 0.9).is_noop());
  EXPECT_TRUE(build_noise_policy(NoiseVariant::kDNE, 0.0).is_noop());
}

TEST(NoisePolicy, NamesAndUnknownVariant) {
  for (auto v : {NoiseVariant::kDNE, NoiseVariant::kSNE, NoiseVariant::kUN, NoiseVariant::kRNP, NoiseVariant::kNT,
                 NoiseVariant::kNE, NoiseVariant::kNone}) {
    EXPECT_EQ(parse_variant(variant_name(v)), v);
  }
  EXPECT_EQ(code_of([] { build_noise_policy("XYZ", 0.1); }), ErrorCode::kUnknownVariant);
}

TEST(NoisePolicy, JsonRoundTrip) {
  const NoisePolicy p = build_noise_policy(NoiseVariant::kRNP, 0.35);
  EXPECT_EQ(policy_from_json(policy_to_json(p)), p);
}

TEST(SampleNoise, ZeroAlphaIsZeroAndDrawsNothing) {
  RngStream a(3, 3), b(3, 3);
  const auto v = sample_noise(build_noise_policy(NoiseVariant::kDNE, 0.0), 16, a);
  for (double x : v) EXPECT_EQ(x, 0.0);
  EXPECT_EQ(a.uniform(), b.uniform());
}

TEST(SampleNoise, GaussianScale) {
  RngStream rng(77, 0);
  const auto v = sample_noise(build_noise_policy(NoiseVariant::kDNE, 0.5), 100000, rng);
  double s = 0.0, s2 = 0.0;
  for (double x : v) {
    s += x;
    s2 += x * x;
  }
  const double mean = s / double(v.size());
  const double sd = std::sqrt(s2 / double(v.size()) - mean * mean);
  EXPECT_LT(std::abs(mean), 0.005);
  EXPECT_NEAR(sd, 0.5, 0.005);
}

TEST(SampleNoise, UniformSupportAndScale) {
  RngStream rng(78, 0);
  const auto v = sample_noise(build_noise_policy(NoiseVariant::kUN, 0.3), 100000, rng);
  double s2 = 0.0;
  for (double x : v) {
    EXPECT_GE(x, -0.3);
    EXPECT_LE(x, 0.3);
    s2 += x * x;
  }
  const double sd = std::sqrt(s2 / double(v.size()));
  const double expected = 0.3 / std::sqrt(3.0);
  EXPECT_NEAR(sd, expected, 0.01 * expected);
}

TEST(SampleNoise, ResampledEveryCall) {
  RngStream rng(5, 5);
  const NoisePolicy p = build_noise_policy(NoiseVariant::kDNE, 1.0);
  EXPECT_NE(sample_noise(p, 4, rng), sample_noise(p, 4, rng));
}

// ---- plan -----------------------------------------------------------------

TEST(EditPlan, InvariantsAndJson) {
  const ModelConfig cfg = make_config(30);
  EditPlan p = default_plan(cfg);
  EXPECT_EQ(p.critical_layers.back(), p.layer);
  p.critical_layers = {1, 3};
  p.layer = 2;
  EXPECT_EQ(code_of([&] { p.validate(cfg); }), ErrorCode::kInvalidArgument);
  p = default_plan(cfg);
  p.opt_steps = 0;
  EXPECT_EQ(code_of([&] { p.validate(cfg); }), ErrorCode::kInvalidArgument);
  p = default_plan(cfg);
  p.clamp_factor = 0.0;
  EXPECT_EQ(code_of([&] { p.validate(cfg); }), ErrorCode::kInvalidArgument);

  EditPlan q = default_plan(cfg);
  q.layer = 3;
  q.critical_layers = {2, 3};
  q.noise = build_noise_policy(NoiseVariant::kUN, 0.2);
  q.key_prefixes = {"", "the"};
  const EditPlan back = plan_from_json(plan_to_json(q), cfg);
  EXPECT_EQ(plan_to_json(back), plan_to_json(q));
}

TEST(EditPlan, AlphaByBatchDecade) {
  EXPECT_DOUBLE_EQ(default_alpha(1), 0.5);
  EXPECT_DOUBLE_EQ(default_alpha(10), 0.4);
  EXPECT_DOUBLE_EQ(default_alpha(100), 0.3);
  EXPECT_DOUBLE_EQ(default_alpha(1000), 0.2);
  EXPECT_DOUBLE_EQ(default_alpha(10000), 0.1);
  EXPECT_DOUBLE_EQ(default_alpha(100000), 0.1);
  EXPECT_NEAR(default_alpha(8), 0.5 - 0.1 * std::log10(8.0), 1e-12);
}

// ---- delta optimization ---------------------------------------------------

TEST_F(EditFixture, EarlyExitReturnsZeroDelta) {
  EditPlan p = default_plan(model().config);
  p.stop_threshold = 1e9;
  RngStream rng(1, 1);
  const DeltaResult r = compute_delta(model(), vocab(), records()[0], p, rng);
  EXPECT_EQ(r.steps, 0);
  for (double v : r.delta.data()) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(r.log.empty());
}

namespace {

// −Σ log P(target | prompt) with δ added after block `layer`, via forward().
double oracle_loss(const ModelBundle& m, const EditSite& site, int layer, const Tensor& delta) {
  std::vector<int> input = site.prompt;
  input.insert(input.end(), site.target.begin(), site.target.end() - 1);
  const std::vector<Intervention> iv = {Intervention::add_hidden(layer, site.subject.last(), delta)};
  const Tensor lp = ad::log_softmax_rows(forward(m, input, iv).logits);
  double loss = 0.0;
  for (std::size_t j = 0; j < site.target.size(); ++j) loss -= lp.at(site.prompt.size() - 1 + j, site.target[j]);
  return loss;
}

}  // namespace

TEST_F(EditFixture, DeltaTraceMatchesFiniteDifferenceDescent) {
  EditPlan p = default_plan(model().config);
  p.opt_steps = 25;
  p.learning_rate = 0.5;
  p.stop_threshold = 0.0;
  const FactRecord& rec = records()[1];
  RngStream rng(2, 2);
  const DeltaResult r = compute_delta(model(), vocab(), rec, p, rng);

  // Reference: same descent with central-difference gradients and the same clamp.
  const EditSite site = make_edit_site(vocab(), rec);
  const std::size_t d = static_cast<std::size_t>(model().config.d_model);
  const double bound = p.clamp_factor * norm2(r.hidden.data());
  Tensor delta({d});
  std::vector<double> ref_losses;
  for (int step = 0; step < p.opt_steps; ++step) {
    ref_losses.push_back(oracle_loss(model(), site, p.layer, delta));
    Tensor grad({d});
    for (std::size_t i = 0; i < d; ++i) {
      Tensor hi = delta, lo = delta;
      hi[i] += 1e-5;
      lo[i] -= 1e-5;
      grad[i] = (oracle_loss(model(), site, p.layer, hi) - oracle_loss(model(), site, p.layer, lo)) / 2e-5;
    }
    for (std::size_t i = 0; i < d; ++i) delta[i] -= p.learning_rate * grad[i];
    const double n = norm2(delta.data());
    if (n > bound) {
      for (double& v : delta.data()) v *= bound / n;
    }
  }
  ASSERT_EQ(r.log.size(), static_cast<std::size_t>(p.opt_steps) + 1);
  for (int s = 0; s < p.opt_steps; ++s) {
    EXPECT_NEAR(r.log[s].loss, ref_losses[s], 1e-6 * (1.0 + ref_losses[s])) << "step " << s;
  }
  EXPECT_LE(max_abs_diff(r.delta, delta), 1e-5);
  EXPECT_LT(r.final_loss, r.initial_loss);
  EXPECT_NEAR(r.final_loss, oracle_loss(model(), site, p.layer, r.delta), 1e-9);
}

TEST_F(EditFixture, ClampHoldsAtEveryStep) {
  EditPlan p = default_plan(model().config);
  p.clamp_factor = 0.05;
  p.learning_rate = 50.0;
  p.noise = build_noise_policy(NoiseVariant::kDNE, 0.5);
  RngStream rng(3, 3);
  const DeltaResult r = compute_delta(model(), vocab(), records()[2], p, rng);
  ASSERT_FALSE(r.log.empty());
  for (const auto& s : r.log) EXPECT_LE(s.delta_norm, s.bound * (1.0 + 1e-12));
}

TEST_F(EditFixture, ZeroAlphaMatchesNoneBitForBit) {
  EditPlan none = default_plan(model().config);
  none.layer = 2;
  none.critical_layers = {1, 2};
  for (auto v : {NoiseVariant::kDNE, NoiseVariant::kSNE, NoiseVariant::kUN, NoiseVariant::kRNP, NoiseVariant::kNT,
                 NoiseVariant::kNE}) {
    EditPlan zero = none;
    zero.noise = build_noise_policy(v, 0.0);
    RngStream a(9, 9), b(9, 9);
    const DeltaResult da = compute_delta(model(), vocab(), records()[0], none, a);
    const DeltaResult db = compute_delta(model(), vocab(), records()[0], zero, b);
    EXPECT_EQ(da.delta, db.delta) << variant_name(v);
    EXPECT_EQ(da.final_loss, db.final_loss);
  }
  const auto cov = estimate_covariances(model(), corpus(), none.critical_layers, -1.0);
  EditPlan zero = none;
  zero.noise = build_noise_policy(NoiseVariant::kDNE, 0.0);
  const EditBatch b = batch_of({0, 3});
  const EditResult ra = apply_memit(model(), vocab(), b, none, cov);
  const EditResult rb = apply_memit(model(), vocab(), b, zero, cov);
  for (const auto& [l, t] : ra.delta.layers) EXPECT_EQ(t, rb.delta.layers.at(l));
}

TEST_F(EditFixture, NoiseChangesDelta) {
  EditPlan p = default_plan(model().config);
  p.stop_threshold = 0.0;
  p.opt_steps = 5;
  EditPlan noisy = p;
  noisy.noise = build_noise_policy(NoiseVariant::kDNE, 1.0);
  RngStream a(1, 1), b(1, 1);
  EXPECT_NE(compute_delta(model(), vocab(), records()[0], p, a).delta,
            compute_delta(model(), vocab(), records()[0], noisy, b).delta);
}

// ---- keys and covariance --------------------------------------------------

TEST_F(EditFixture, KeyWithEmptyPrefixIsSinglePromptActivation) {
  EditPlan p = default_plan(model().config);
  p.key_prefixes = {""};
  const FactRecord& rec = records()[0];
  const EditSite site = make_edit_site(vocab(), rec);
  const ForwardTrace t = forward(model(), site.prompt, std::vector{Intervention::read_act(2, {site.subject.last()})});
  const Tensor k = estimate_key(model(), vocab(), rec, p, 2);
  EXPECT_EQ(k.data(), t.activations[0].values);
}

TEST_F(EditFixture, KeyWithTwoPrefixesIsMean) {
  EditPlan p = default_plan(model().config);
  p.key_prefixes = {"", "the"};
  const FactRecord& rec = records()[0];
  const auto subject = vocab().tokenize(rec.subject);
  std::vector<double> expected(static_cast<std::size_t>(model().config.d_ffn), 0.0);
  for (const std::string text : {rec.edit_prompt, "the " + rec.edit_prompt}) {
    const auto tokens = vocab().tokenize(text);
    const auto span = find_subject_span(tokens, subject);
    const auto t = forward(model(), tokens, std::vector{Intervention::read_act(1, {span.last()})});
    for (std::size_t i = 0; i < expected.size(); ++i) expected[i] += 0.5 * t.activations[0].values[i];
  }
  const Tensor k = estimate_key(model(), vocab(), rec, p, 1);
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_NEAR(k[i], expected[i], 1e-14);
}

TEST(Covariance, HandCases) {
  const Tensor single = covariance_from_keys({{1, 0}}, 2, 0.0);
  EXPECT_EQ(single, Tensor::matrix(2, 2, {1, 0, 0, 0}));
  const Tensor two = covariance_from_keys({{1, 0}, {0, 1}}, 2, 0.0);
  EXPECT_EQ(two, Tensor::matrix(2, 2, {0.5, 0, 0, 0.5}));
  const Tensor ridge_only = covariance_from_keys({}, 3, 0.1);
  EXPECT_EQ(ridge_only, Tensor::matrix(3, 3, {0.1, 0, 0, 0, 0.1, 0, 0, 0, 0.1}));
}

TEST_F(EditFixture, SingularWithoutRidge) {
  // Far fewer tokens than FFN units: the key average has rank below d_ffn.
  const std::vector<std::vector<int>> few = {corpus()[0]};
  EXPECT_EQ(code_of([&] { estimate_covariance(model(), few, 1, 0.0); }), ErrorCode::kSingularCovariance);
  EXPECT_NO_THROW(estimate_covariance(model(), few, 1, 1e-3));
}

TEST_F(EditFixture, CorpusCovarianceMatchesOuterProducts) {
  const auto c = corpus();
  const std::vector<std::vector<int>> sample(c.begin(), c.begin() + 3);
  const Tensor cov = estimate_covariance(model(), sample, 2, 0.01);
  const auto n = static_cast<std::size_t>(model().config.d_ffn);
  Tensor ref({n, n});
  std::size_t count = 0;
  for (const auto& seq : sample) {
    std::vector<std::size_t> all(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i) all[i] = i;
    const auto t = forward(model(), seq, std::vector{Intervention::read_act(2, all)});
    for (const auto& a : t.activations) {
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) ref.at(i, j) += a.values[i] * a.values[j];
      ++count;
    }
  }
  for (double& v : ref.data()) v /= double(count);
  for (std::size_t i = 0; i < n; ++i) ref.at(i, i) += 0.01;
  EXPECT_LE(max_abs_diff(cov, ref), 1e-12);
}

// ---- rank-one and multi-layer updates -------------------------------------

TEST(Rome, ZeroResidualLeavesWeights) {
  RngStream rng(1, 0);
  const Tensor w = random_tensor(rng, {5, 3});
  const Tensor k = random_tensor(rng, {5});
  const Tensor v = matmul_transposed_a(w, Tensor::matrix(5, 1, k.data()));
  const Tensor out = apply_rome(w, k, Tensor::vector(v.data()), Tensor::identity(5));
  EXPECT_LE(max_abs_diff(out, w), 1e-15);
}

TEST(Rome, TwoByTwoHandCase) {
  // Row convention W (d_ffn × d_model), v = Wᵀk. W = I, k = e₁, v* = e₂.
  const Tensor out = apply_rome(Tensor::identity(2), Tensor::vector({1, 0}), Tensor::vector({0, 1}), Tensor::identity(2));
  EXPECT_EQ(out, Tensor::matrix(2, 2, {0, 1, 0, 1}));
  // Column convention: W'ᵀ = [[0,0],[1,1]] maps e₁ to e₂.
  EXPECT_EQ(out.transposed(), Tensor::matrix(2, 2, {0, 0, 1, 1}));
}

TEST(Rome, ExactnessAndOrthogonalPreservation) {
  RngStream rng(2024, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d_ffn = 2 + rng.index(63);
    const std::size_t d_model = 1 + rng.index(16);
    const Tensor w = random_tensor(rng, {d_ffn, d_model});
    const Tensor k = random_tensor(rng, {d_ffn});
    const Tensor v = random_tensor(rng, {d_model});
    const Tensor out = apply_rome(w, k, v, Tensor::identity(d_ffn));
    const Tensor got = matmul_transposed_a(out, Tensor::matrix(d_ffn, 1, k.data()));
    for (std::size_t j = 0; j < d_model; ++j) EXPECT_NEAR(got[j], v[j], 1e-8);
    // k ⟂ k*: Gram–Schmidt a random vector against k.
    Tensor o = random_tensor(rng, {d_ffn});
    const double proj = dot(o.data(), k.data()) / dot(k.data(), k.data());
    for (std::size_t i = 0; i < d_ffn; ++i) o[i] -= proj * k[i];
    const Tensor before = matmul_transposed_a(w, Tensor::matrix(d_ffn, 1, o.data()));
    const Tensor after = matmul_transposed_a(out, Tensor::matrix(d_ffn, 1, o.data()));
    EXPECT_LE(max_abs_diff(before, after), 1e-10);
  }
}

TEST(Rome, DegenerateKey) {
  EXPECT_EQ(code_of([] {
              apply_rome(Tensor::identity(2), Tensor::vector({0, 0}), Tensor::vector({1, 1}), Tensor::identity(2));
            }),
            ErrorCode::kDegenerateKey);
}

TEST(Memit, ShermanMorrisonHalfWay) {
  RngStream rng(5, 0);
  const std::size_t d_ffn = 6, d_model = 4;
  const Tensor w = random_tensor(rng, {d_ffn, d_model});
  const Tensor r = random_tensor(rng, {d_model});
  Tensor keys({d_ffn, 1});
  keys.at(0, 0) = 1.0;
  const Tensor delta = memit_layer_update(Tensor::identity(d_ffn), keys, Tensor::matrix(d_model, 1, r.data()), 1.0);
  // (I + e₁e₁ᵀ)⁻¹e₁ = e₁/2, so row 0 of Δ is r/2 and every other row is zero.
  for (std::size_t j = 0; j < d_model; ++j) EXPECT_NEAR(delta.at(0, j), r[j] / 2.0, 1e-10);
  for (std::size_t i = 1; i < d_ffn; ++i)
    for (std::size_t j = 0; j < d_model; ++j) EXPECT_NEAR(delta.at(i, j), 0.0, 1e-10);
  Tensor updated = w;
  for (std::size_t i = 0; i < w.size(); ++i) updated[i] += delta[i];
  for (std::size_t j = 0; j < d_model; ++j) EXPECT_NEAR(updated.at(0, j), w.at(0, j) + r[j] / 2.0, 1e-10);
}

TEST(Memit, LargeRegularizerSuppressesUpdate) {
  RngStream rng(6, 0);
  const Tensor keys = random_tensor(rng, {8, 3});
  const Tensor res = random_tensor(rng, {5, 3});
  const Tensor delta = memit_layer_update(Tensor::identity(8), keys, res, 1e9);
  EXPECT_LE(max_abs(delta), 1e-6 * max_abs(res));
}

TEST(Memit, SmallRegularizerApproachesRome) {
  RngStream rng(7, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d_ffn = 3 + rng.index(30), d_model = 2 + rng.index(8);
    const Tensor m = random_tensor(rng, {d_ffn, d_ffn});
    Tensor c = matmul_transposed_a(m, m);
    for (std::size_t i = 0; i < d_ffn; ++i) c.at(i, i) += 1.0;
    const Tensor w = random_tensor(rng, {d_ffn, d_model});
    const Tensor k = random_tensor(rng, {d_ffn});
    const Tensor v = random_tensor(rng, {d_model});
    const Tensor cur = matmul_transposed_a(w, Tensor::matrix(d_ffn, 1, k.data()));
    Tensor res({d_model, 1});
    for (std::size_t j = 0; j < d_model; ++j) res.at(j, 0) = v[j] - cur[j];
    const Tensor delta = memit_layer_update(c, Tensor::matrix(d_ffn, 1, k.data()), res, 1e-8);
    Tensor memit = w;
    for (std::size_t i = 0; i < w.size(); ++i) memit[i] += delta[i];
    EXPECT_LE(max_abs_diff(memit, apply_rome(w, k, v, c)), 1e-6);
  }
}

TEST_F(EditFixture, MemitWithZeroResidualsIsZero) {
  EditPlan p = default_plan(model().config);
  p.layer = 2;
  p.critical_layers = {1, 2};
  p.stop_threshold = 1e9;  // δ = 0, so every target equals the current hidden state
  const auto cov = estimate_covariances(model(), corpus(), p.critical_layers, -1.0);
  const EditResult r = apply_memit(model(), vocab(), batch_of({0, 1, 2}), p, cov);
  ASSERT_EQ(r.delta.layers.size(), 2u);
  EXPECT_TRUE(r.delta.all_zero());
}

TEST_F(EditFixture, MemitReachesTargetsAtFinalLayer) {
  EditPlan p = default_plan(model().config);
  p.layer = 2;
  p.critical_layers = {2};
  p.opt_steps = 10;
  p.learning_rate = 1.0;
  p.memit_regularizer = 1e-6;
  const EditBatch b = batch_of({1});
  const auto cov = estimate_covariances(model(), corpus(), p.critical_layers, -1.0);
  const EditResult r = apply_memit(model(), vocab(), b, p, cov);
  ModelBundle edited = model();
  apply_weight_delta(edited, r.delta);
  const EditSite site = make_edit_site(vocab(), b.records[0]);
  const auto h = forward(edited, site.prompt).hidden[1].row(site.subject.last());
  for (std::size_t c = 0; c < h.size(); ++c) {
    EXPECT_NEAR(h[c], r.deltas[0].hidden[c] + r.deltas[0].delta[c], 1e-4);
  }
}

TEST_F(EditFixture, ConflictingBatchNeverMutates) {
  EditBatch b = batch_of({0});
  FactRecord clash = b.records[0];
  clash.case_id = "clash";
  clash.target_new = b.records[0].target_true;
  b.records.push_back(clash);
  const EditPlan p = default_plan(model().config);
  const auto cov = estimate_covariances(model(), corpus(), p.critical_layers, -1.0);
  const std::string before = model_fingerprint(model());
  EXPECT_EQ(code_of([&] { apply_memit(model(), vocab(), b, p, cov); }), ErrorCode::kConflict);
  EXPECT_EQ(code_of([&] { apply_rome_batch(model(), vocab(), b, p, cov); }), ErrorCode::kConflict);
  EXPECT_EQ(model_fingerprint(model()), before);
}

TEST_F(EditFixture, PerRecordNoiseIndependentOfBatchOrder) {
  EditPlan p = default_plan(model().config);
  p.noise = build_noise_policy(NoiseVariant::kDNE, 0.5);
  p.opt_steps = 5;
  p.stop_threshold = 0.0;
  const auto cov = estimate_covariances(model(), corpus(), p.critical_layers, -1.0);
  const EditResult a = apply_memit(model(), vocab(), batch_of({0, 4}), p, cov);
  const EditResult b = apply_memit(model(), vocab(), batch_of({4, 0}), p, cov);
  EXPECT_EQ(a.deltas[0].delta, b.deltas[1].delta);
  EXPECT_EQ(a.deltas[1].delta, b.deltas[0].delta);
  const EditResult again = apply_memit(model(), vocab(), batch_of({0, 4}), p, cov);
  for (const auto& [l, t] : a.delta.layers) EXPECT_EQ(t, again.delta.layers.at(l));
}

TEST_F(EditFixture, RomeBatchHitsValueExactly) {
  EditPlan p = default_plan(model().config);
  p.opt_steps = 5;
  p.learning_rate = 1.0;
  const EditBatch b = batch_of({2});
  const auto cov = estimate_covariances(model(), corpus(), {p.layer}, -1.0);
  const EditResult r = apply_rome_batch(model(), vocab(), b, p, cov);
  ModelBundle edited = model();
  apply_weight_delta(edited, r.delta);
  const EditSite site = make_edit_site(vocab(), b.records[0]);
  const auto out = forward(edited, site.prompt).ffn_out[static_cast<std::size_t>(p.layer - 1)].row(site.subject.last());
  for (std::size_t c = 0; c < out.size(); ++c) EXPECT_NEAR(out[c], r.deltas[0].value[c] + r.deltas[0].delta[c], 1e-8);
}

TEST_F(EditFixture, ParameterNoiseScalesWithTensorSpread) {
  ModelBundle m = model();
  RngStream rng(8, 8);
  perturb_parameters(m, build_noise_policy(NoiseVariant::kNT, 0.1), rng);
  const Tensor& before = model().weights.unembedding;
  const Tensor& after = m.weights.unembedding;
  double mean = 0.0;
  for (double v : before.data()) mean += v;
  mean /= double(before.size());
  double var = 0.0;
  for (double v : before.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / double(before.size()));
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_LE(std::abs(after[i] - before[i]), 0.1 * sd + 1e-15);
  EXPECT_GT(max_abs_diff(before, after), 0.0);
}

TEST_F(EditFixture, WeightDeltaRoundTrip) {
  EditPlan p = default_plan(model().config);
  p.opt_steps = 3;
  const auto cov = estimate_covariances(model(), corpus(), p.critical_layers, -1.0);
  const EditResult r = apply_memit(model(), vocab(), batch_of({1, 2}), p, cov);
  const auto dir = std::filesystem::temp_directory_path() / "kedit_test_delta";
  std::filesystem::remove_all(dir);
  save_weight_delta(dir, model().config, r.delta);
  const WeightDelta back = load_weight_delta(dir);
  ASSERT_EQ(back.layers.size(), r.delta.layers.size());
  for (const auto& [l, t] : r.delta.layers) EXPECT_EQ(back.layers.at(l), t);
  std::filesystem::remove_all(dir);
}
