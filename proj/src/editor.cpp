#include "kedit/editor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "kedit/error.hpp"
#include "kedit/linalg.hpp"

namespace kedit {

using nlohmann::json;

std::string ConflictReport::describe() const {
  std::ostringstream os;
  for (const auto& c : conflicts) {
    os << c.case_a << " vs " << c.case_b << " (" << c.subject << ", " << c.relation << "); ";
  }
  return os.str();
}

ConflictReport validate_batch(const EditBatch& batch) {
  ConflictReport report;
  const auto& rs = batch.records;
  for (std::size_t i = 0; i < rs.size(); ++i) {
    for (std::size_t j = i + 1; j < rs.size(); ++j) {
      if (rs[i].subject == rs[j].subject && rs[i].relation == rs[j].relation && rs[i].target_new != rs[j].target_new) {
        report.conflicts.push_back({rs[i].case_id, rs[j].case_id, rs[i].subject, rs[i].relation});
      }
    }
  }
  return report;
}

void EditPlan::validate(const ModelConfig& config) const {
  auto fail = [](const std::string& m) { throw Error(ErrorCode::kInvalidArgument, "edit plan: " + m); };
  if (layer < 1 || layer > config.n_layers) fail("layer outside model depth");
  if (critical_layers.empty()) fail("critical layers must be non-empty");
  if (!std::is_sorted(critical_layers.begin(), critical_layers.end()) ||
      std::adjacent_find(critical_layers.begin(), critical_layers.end()) != critical_layers.end()) {
    fail("critical layers must be strictly ascending");
  }
  if (critical_layers.back() != layer) fail("critical layers must end at the edit layer");
  if (critical_layers.front() < 1) fail("critical layers must be ≥ 1");
  if (opt_steps < 1) fail("opt_steps must be ≥ 1");
  if (!(clamp_factor > 0.0)) fail("clamp factor must be positive");
  if (!(learning_rate > 0.0)) fail("learning rate must be positive");
  if (!(memit_regularizer >= 0.0)) fail("memit regularizer must be non-negative");
  if (!(noise.alpha >= 0.0)) fail("alpha must be non-negative");
  if (key_prefixes.empty()) fail("key prefix list must be non-empty");
}

EditPlan default_plan(const ModelConfig& config) {
  EditPlan plan;
  plan.layer = config.default_edit_layer();
  plan.critical_layers.clear();
  for (int l = std::max(1, plan.layer - 1); l <= plan.layer; ++l) plan.critical_layers.push_back(l);
  return plan;
}

double default_alpha(std::size_t batch_size) {
  const double decade = std::log10(static_cast<double>(std::max<std::size_t>(batch_size, 1)));
  return std::clamp(0.5 - 0.1 * decade, 0.1, 0.5);
}

json policy_to_json(const NoisePolicy& p) {
  return json{{"variant", variant_name(p.variant)},
              {"distribution", distribution_name(p.distribution)},
              {"alpha", p.alpha},
              {"layer_range", layer_range_name(p.layer_range)},
              {"position_rule", position_rule_name(p.position_rule)},
              {"target", target_name(p.target)}};
}

NoisePolicy policy_from_json(const json& j) {
  try {
    NoisePolicy p = build_noise_policy(j.value("variant", std::string("NONE")), j.value("alpha", 0.0));
    if (j.contains("distribution")) p.distribution = parse_distribution(j.at("distribution").get<std::string>());
    if (j.contains("layer_range")) p.layer_range = parse_layer_range(j.at("layer_range").get<std::string>());
    if (j.contains("position_rule")) p.position_rule = parse_position_rule(j.at("position_rule").get<std::string>());
    if (j.contains("target")) p.target = parse_target(j.at("target").get<std::string>());
    return p;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("noise policy: ") + e.what());
  }
}

json plan_to_json(const EditPlan& p) {
  return json{{"layer", p.layer},
              {"critical_layers", p.critical_layers},
              {"opt_steps", p.opt_steps},
              {"learning_rate", p.learning_rate},
              {"clamp_factor", p.clamp_factor},
              {"stop_threshold", p.stop_threshold},
              {"noise", policy_to_json(p.noise)},
              {"covariance_ridge", p.covariance_ridge},
              {"memit_regularizer", p.memit_regularizer},
              {"key_prefixes", p.key_prefixes}};
}

EditPlan plan_from_json(const json& j, const ModelConfig& config) {
  EditPlan p = default_plan(config);
  try {
    p.layer = j.value("layer", p.layer);
    if (j.contains("critical_layers")) {
      p.critical_layers = j.at("critical_layers").get<std::vector<int>>();
    } else if (j.contains("layer")) {
      p.critical_layers.clear();
      for (int l = std::max(1, p.layer - 1); l <= p.layer; ++l) p.critical_layers.push_back(l);
    }
    p.opt_steps = j.value("opt_steps", p.opt_steps);
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.clamp_factor = j.value("clamp_factor", p.clamp_factor);
    p.stop_threshold = j.value("stop_threshold", p.stop_threshold);
    if (j.contains("noise")) p.noise = policy_from_json(j.at("noise"));
    p.covariance_ridge = j.value("covariance_ridge", p.covariance_ridge);
    p.memit_regularizer = j.value("memit_regularizer", p.memit_regularizer);
    if (j.contains("key_prefixes")) p.key_prefixes = j.at("key_prefixes").get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("edit plan: ") + e.what());
  }
  p.validate(config);
  return p;
}

EditSite make_edit_site(const Vocabulary& vocab, const FactRecord& record) {
  EditSite site;
  site.prompt = vocab.tokenize(record.edit_prompt);
  site.target = vocab.tokenize(record.target_new);
  site.subject = find_subject_span(site.prompt, vocab.tokenize(record.subject));
  return site;
}

namespace {

struct TeacherForced {
  std::vector<int> input;
  std::vector<int> targets;
};

TeacherForced teacher_forced(const std::vector<int>& prompt, const std::vector<int>& target) {
  TeacherForced tf;
  tf.input = prompt;
  tf.input.insert(tf.input.end(), target.begin(), target.end() - 1);
  tf.targets.assign(tf.input.size(), -1);
  for (std::size_t j = 0; j < target.size(); ++j) tf.targets[prompt.size() - 1 + j] = target[j];
  return tf;
}

double nll(const ModelBundle& model, const TeacherForced& tf, int layer, std::size_t position, const Tensor* delta) {
  ad::Graph g;
  const auto w = bind_constants(g, model);
  std::vector<HiddenDelta> deltas;
  if (delta != nullptr) deltas.push_back({layer, position, g.constant(*delta)});
  const ad::Var logits = forward_graph(g, model.config, w, tf.input, {}, deltas, nullptr);
  return ad::cross_entropy_sum(logits, tf.targets).value()[0];
}

Tensor row_vector(std::span<const double> row) { return Tensor::vector(std::vector<double>(row.begin(), row.end())); }

}  // namespace

double target_nll(const ModelBundle& model, const EditSite& site, int layer, const Tensor* delta) {
  return nll(model, teacher_forced(site.prompt, site.target), layer, site.subject.last(), delta);
}

void perturb_parameters(ModelBundle& model, const NoisePolicy& policy, RngStream& rng) {
  if (policy.is_noop()) return;
  model.for_each_parameter([&](const std::string&, Tensor& t) {
    double mean = 0.0;
    for (double v : t.data()) mean += v;
    mean /= static_cast<double>(t.size());
    double var = 0.0;
    for (double v : t.data()) var += (v - mean) * (v - mean);
    const double stddev = std::sqrt(var / static_cast<double>(t.size()));
    const auto noise = sample_noise(policy, t.size(), rng);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] += stddev * noise[i];
  });
}

DeltaResult compute_delta(const ModelBundle& model, const Vocabulary& vocab, const FactRecord& record,
                          const EditPlan& plan, RngStream& rng) {
  plan.validate(model.config);
  const EditSite site = make_edit_site(vocab, record);
  const TeacherForced tf = teacher_forced(site.prompt, site.target);
  const std::size_t pos = site.subject.last();
  const int layer = plan.layer;
  const auto d = static_cast<std::size_t>(model.config.d_model);

  DeltaResult result;
  {
    const ForwardTrace clean = forward(model, tf.input);
    result.hidden = row_vector(clean.hidden[static_cast<std::size_t>(layer - 1)].row(pos));
    result.value = row_vector(clean.ffn_out[static_cast<std::size_t>(layer - 1)].row(pos));
  }
  const double bound = plan.clamp_factor * norm2(result.hidden.data());

  const NoisePolicy& noise = plan.noise;
  const ModelBundle* working = &model;
  ModelBundle perturbed;
  if (noise.target == NoiseTarget::kParameters && !noise.is_noop()) {
    perturbed = model;
    perturb_parameters(perturbed, noise, rng);
    working = &perturbed;
  }
  const double embed_scale = 1.0 / std::sqrt(static_cast<double>(tf.input.size() * d));
  const auto noise_layers = noise.layers(layer);

  Tensor delta({d});
  for (int step = 0;; ++step) {
    ad::Graph g;
    const auto w = bind_constants(g, *working);
    const ad::Var delta_var = g.leaf(delta);

    std::vector<Intervention> ivs;
    if (!noise.is_noop() && noise.target == NoiseTarget::kFfnActivation) {
      const std::size_t noise_pos =
          noise.position_rule == PositionRule::kRandomToken ? rng.index(site.prompt.size()) : pos;
      ivs.push_back(Intervention::noise_act(noise_layers, {noise_pos}, noise, rng));
    } else if (!noise.is_noop() && noise.target == NoiseTarget::kEmbeddings) {
      ivs.push_back(Intervention::noise_embedding(noise, embed_scale, rng));
    }
    const HiddenDelta hd{layer, pos, delta_var};
    const ad::Var logits = forward_graph(g, working->config, w, tf.input, ivs, {&hd, 1}, nullptr);
    const ad::Var loss = ad::cross_entropy_sum(logits, tf.targets);
    const double loss_value = loss.value()[0];
    if (!std::isfinite(loss_value)) {
      throw Error(ErrorCode::kNonFiniteLoss, record.case_id + ": loss non-finite at step " + std::to_string(step));
    }
    if (step == 0) result.initial_loss = loss_value;
    if (loss_value <= plan.stop_threshold || step == plan.opt_steps) {
      if (step == plan.opt_steps) result.log.push_back({step, loss_value, norm2(delta.data()), bound});
      break;
    }

    g.backward(loss);
    const Tensor& grad = delta_var.grad();
    for (std::size_t i = 0; i < d; ++i) delta[i] -= plan.learning_rate * grad[i];
    const double n = norm2(delta.data());
    if (n > bound && n > 0.0) {
      for (double& v : delta.data()) v *= bound / n;
    }
    ++result.steps;
    result.log.push_back({step, loss_value, norm2(delta.data()), bound});
  }
  result.delta = delta;
  result.final_loss = target_nll(model, site, layer, &result.delta);
  return result;
}

Tensor estimate_key(const ModelBundle& model, const Vocabulary& vocab, const FactRecord& record, const EditPlan& plan,
                    int layer) {
  if (layer < 1 || layer > model.config.n_layers) throw Error(ErrorCode::kLayerOutOfRange, std::to_string(layer));
  const auto subject = vocab.tokenize(record.subject);
  Tensor key({static_cast<std::size_t>(model.config.d_ffn)});
  for (const auto& prefix : plan.key_prefixes) {
    const std::string text = prefix.empty() ? record.edit_prompt : prefix + " " + record.edit_prompt;
    const auto tokens = vocab.tokenize(text);
    const SubjectSpan span = find_subject_span(tokens, subject);
    const ForwardTrace trace = forward(model, tokens);
    const auto row = trace.ffn_keys[static_cast<std::size_t>(layer - 1)].row(span.last());
    for (std::size_t i = 0; i < key.size(); ++i) key[i] += row[i];
  }
  for (double& v : key.data()) v /= static_cast<double>(plan.key_prefixes.size());
  return key;
}

namespace {

// Smallest eigenvalue above 1e-12 of the largest.
bool well_conditioned(const Tensor& c) {
  const auto n = static_cast<Eigen::Index>(c.rows());
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> m(c.data().data(), n, n);
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  return n == 0 || ev.minCoeff() > 1e-12 * std::max(1.0, ev.maxCoeff());
}

}  // namespace

Tensor covariance_from_keys(const std::vector<std::vector<double>>& keys, std::size_t dim, double ridge) {
  if (!(ridge >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "ridge must be non-negative");
  Tensor c({dim, dim});
  for (const auto& k : keys) {
    if (k.size() != dim) throw Error(ErrorCode::kDimensionMismatch, "key length mismatch");
    for (std::size_t i = 0; i < dim; ++i) {
      const double ki = k[i];
      if (ki == 0.0) continue;
      for (std::size_t j = 0; j < dim; ++j) c.at(i, j) += ki * k[j];
    }
  }
  const double inv_n = keys.empty() ? 0.0 : 1.0 / static_cast<double>(keys.size());
  for (double& v : c.data()) v *= inv_n;
  for (std::size_t i = 0; i < dim; ++i) c.at(i, i) += ridge;
  return c;
}

std::map<int, Tensor> estimate_covariances(const ModelBundle& model, const std::vector<std::vector<int>>& corpus,
                                           const std::vector<int>& layers, double ridge) {
  const auto dim = static_cast<std::size_t>(model.config.d_ffn);
  std::map<int, std::vector<std::vector<double>>> keys;
  for (int l : layers) {
    if (l < 1 || l > model.config.n_layers) throw Error(ErrorCode::kLayerOutOfRange, std::to_string(l));
    keys[l];
  }
  for (const auto& seq : corpus) {
    const ForwardTrace trace = forward(model, seq);
    for (auto& [l, list] : keys) {
      const Tensor& k = trace.ffn_keys[static_cast<std::size_t>(l - 1)];
      for (std::size_t t = 0; t < k.rows(); ++t) list.emplace_back(k.row(t).begin(), k.row(t).end());
    }
  }
  std::map<int, Tensor> out;
  for (auto& [l, list] : keys) {
    double r = ridge;
    if (r < 0.0) {
      const Tensor raw = covariance_from_keys(list, dim, list.empty() ? 1.0 : 0.0);
      double trace = 0.0;
      for (std::size_t i = 0; i < dim; ++i) trace += raw.at(i, i);
      r = 1e-4 * trace / static_cast<double>(dim);
      if (!(r > 0.0)) r = 1e-4;
      Tensor c = raw;
      if (list.empty()) {
        for (std::size_t i = 0; i < dim; ++i) c.at(i, i) = 0.0;
      }
      for (std::size_t i = 0; i < dim; ++i) c.at(i, i) += r;
      out.emplace(l, std::move(c));
    } else {
      Tensor c = covariance_from_keys(list, dim, r);
      if (r == 0.0 && !well_conditioned(c)) {
        throw Error(ErrorCode::kSingularCovariance, "layer " + std::to_string(l) + " covariance is singular");
      }
      out.emplace(l, std::move(c));
    }
  }
  return out;
}

Tensor estimate_covariance(const ModelBundle& model, const std::vector<std::vector<int>>& corpus, int layer,
                           double ridge) {
  if (!(ridge >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "ridge must be non-negative");
  return estimate_covariances(model, corpus, {layer}, ridge).at(layer);
}

Tensor apply_rome(const Tensor& w, const Tensor& key, const Tensor& value, const Tensor& covariance) {
  const std::size_t n_key = w.rows(), n_val = w.cols();
  if (key.size() != n_key || value.size() != n_val || covariance.rows() != n_key || covariance.cols() != n_key) {
    throw Error(ErrorCode::kDimensionMismatch, "rank-one update operand shapes disagree");
  }
  const Tensor u = solve_spd(covariance, Tensor::vector(key.data()));
  const double denom = dot(key.data(), u.data());
  if (!(denom > 1e-12)) throw Error(ErrorCode::kDegenerateKey, "kᵀC⁻¹k = " + std::to_string(denom));
  std::vector<double> residual(n_val);
  for (std::size_t j = 0; j < n_val; ++j) {
    double current = 0.0;
    for (std::size_t i = 0; i < n_key; ++i) current += w.at(i, j) * key[i];
    residual[j] = (value[j] - current) / denom;
  }
  Tensor out = w;
  for (std::size_t i = 0; i < n_key; ++i) {
    for (std::size_t j = 0; j < n_val; ++j) out.at(i, j) += u[i] * residual[j];
  }
  return out;
}

Tensor memit_layer_update(const Tensor& covariance, const Tensor& keys, const Tensor& residuals, double lambda) {
  const std::size_t dim = covariance.rows();
  if (keys.rows() != dim || keys.cols() != residuals.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "keys and residuals must have one column per edit");
  }
  Tensor lhs = covariance;
  for (double& v : lhs.data()) v *= lambda;
  const Tensor kkt = matmul(keys, keys.transposed());
  for (std::size_t i = 0; i < lhs.size(); ++i) lhs[i] += kkt[i];
  const Tensor rhs = matmul(keys, residuals.transposed());
  try {
    return solve_spd(lhs, rhs);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kNotPositiveDefinite) throw Error(ErrorCode::kSingularSystem, e.what());
    throw;
  }
}

RngStream record_stream(std::uint64_t master_seed, const std::string& case_id) {
  return RngStream(master_seed, fnv1a64(case_id));
}

namespace {

void require_valid(const EditBatch& batch) {
  const ConflictReport report = validate_batch(batch);
  if (!report.ok()) throw Error(ErrorCode::kConflict, report.describe());
}

const Tensor& covariance_for(const std::map<int, Tensor>& covariances, int layer) {
  const auto it = covariances.find(layer);
  if (it == covariances.end()) {
    throw Error(ErrorCode::kInvalidArgument, "no covariance for layer " + std::to_string(layer));
  }
  return it->second;
}

std::vector<DeltaResult> compute_deltas(const ModelBundle& model, const Vocabulary& vocab, const EditBatch& batch,
                                        const EditPlan& plan) {
  std::vector<DeltaResult> out;
  for (const auto& r : batch.records) {
    RngStream rng = record_stream(batch.master_seed, r.case_id);
    out.push_back(compute_delta(model, vocab, r, plan, rng));
  }
  return out;
}

}  // namespace

EditResult apply_memit(const ModelBundle& model, const Vocabulary& vocab, const EditBatch& batch, const EditPlan& plan,
                       const std::map<int, Tensor>& covariances) {
  require_valid(batch);
  plan.validate(model.config);
  for (int l : plan.critical_layers) covariance_for(covariances, l);

  EditResult result;
  result.deltas = compute_deltas(model, vocab, batch, plan);
  const std::size_t n = batch.records.size();
  const auto d = static_cast<std::size_t>(model.config.d_model);
  const auto d_ffn = static_cast<std::size_t>(model.config.d_ffn);

  std::vector<EditSite> sites;
  std::vector<Tensor> targets;
  for (std::size_t i = 0; i < n; ++i) {
    sites.push_back(make_edit_site(vocab, batch.records[i]));
    Tensor z = result.deltas[i].hidden;
    for (std::size_t c = 0; c < d; ++c) z[c] += result.deltas[i].delta[c];
    targets.push_back(std::move(z));
  }

  ModelBundle working = model;
  const auto top = static_cast<std::size_t>(plan.layer - 1);
  for (std::size_t li = 0; li < plan.critical_layers.size(); ++li) {
    const int layer = plan.critical_layers[li];
    const double remaining = static_cast<double>(plan.critical_layers.size() - li);
    Tensor keys({d_ffn, std::max<std::size_t>(n, 1)});
    Tensor residuals({d, std::max<std::size_t>(n, 1)});
    for (std::size_t i = 0; i < n; ++i) {
      const ForwardTrace trace = forward(working, sites[i].prompt);
      const auto current = trace.hidden[top].row(sites[i].subject.last());
      for (std::size_t c = 0; c < d; ++c) residuals.at(c, i) = (targets[i][c] - current[c]) / remaining;
      const Tensor k = estimate_key(working, vocab, batch.records[i], plan, layer);
      for (std::size_t r = 0; r < d_ffn; ++r) keys.at(r, i) = k[r];
    }
    Tensor update = n == 0 ? Tensor({d_ffn, d})
                           : memit_layer_update(covariance_for(covariances, layer), keys, residuals,
                                                plan.memit_regularizer);
    Tensor& w = working.value_projection(layer);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] += update[i];
    result.delta.layers.emplace(layer, std::move(update));
  }
  return result;
}

EditResult apply_rome_batch(const ModelBundle& model, const Vocabulary& vocab, const EditBatch& batch,
                            const EditPlan& plan, const std::map<int, Tensor>& covariances) {
  require_valid(batch);
  plan.validate(model.config);
  const Tensor& c = covariance_for(covariances, plan.layer);

  EditResult result;
  ModelBundle working = model;
  const Tensor original = model.value_projection(plan.layer);
  for (const auto& r : batch.records) {
    RngStream rng = record_stream(batch.master_seed, r.case_id);
    DeltaResult dr = compute_delta(working, vocab, r, plan, rng);
    const Tensor key = estimate_key(working, vocab, r, plan, plan.layer);
    Tensor value = dr.value;
    for (std::size_t i = 0; i < value.size(); ++i) value[i] += dr.delta[i];
    Tensor& w = working.value_projection(plan.layer);
    w = apply_rome(w, key, value, c);
    result.deltas.push_back(std::move(dr));
  }
  Tensor diff = working.value_projection(plan.layer);
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] -= original[i];
  result.delta.layers.emplace(plan.layer, std::move(diff));
  return result;
}

}  // namespace kedit
