#include "kedit/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

#include "kedit/checkpoint.hpp"
#include "kedit/error.hpp"
#include "kedit/probe.hpp"
#include "kedit/rng.hpp"

namespace kedit {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kDataFile = "data/dataset.jsonl";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << text;
}

void write_json(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, path.string() + ": " + e.what());
  }
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Hash of a file, or of every file below a directory in path order.
json hash_path(const fs::path& root, const std::string& rel) {
  const fs::path p = root / rel;
  if (!fs::exists(p)) throw Error(ErrorCode::kIo, "missing input " + p.string());
  json out = json::object();
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(p)) {
      if (e.is_regular_file() && e.path().filename() != "manifest.json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) out[fs::relative(f, root).generic_string()] = hex64(fnv1a64(read_file(f)));
  } else {
    out[rel] = hex64(fnv1a64(read_file(p)));
  }
  return out;
}

json hash_all(const fs::path& root, const std::vector<std::string>& rels) {
  json out = json::object();
  for (const auto& r : rels) out.update(hash_path(root, r));
  return out;
}

std::string strip_code(const Error& e) {
  const std::string what = e.what();
  const std::string prefix = std::string(error_code_name(e.code())) + ": ";
  return what.rfind(prefix, 0) == 0 ? what.substr(prefix.size()) : what;
}

// Runs `body` for a stage directory; on failure leaves FAILED and rethrows
// with the stage name.
void run_stage(const ExperimentConfig& config, const std::string& name, const std::string& dir,
               const std::function<void(const fs::path&)>& body) {
  const fs::path stage_dir = config.output_dir / dir;
  fs::create_directories(stage_dir);
  fs::remove(stage_dir / "FAILED");
  auto fail = [&](const std::string& message) {
    write_file(stage_dir / "FAILED", "stage: " + name + "\n" + message + "\n");
  };
  try {
    body(stage_dir);
  } catch (const Error& e) {
    fail(e.what());
    throw Error(e.code(), "stage '" + name + "': " + strip_code(e));
  } catch (const std::exception& e) {
    fail(e.what());
    throw Error(ErrorCode::kIo, "stage '" + name + "': " + e.what());
  }
}

void write_manifest(const ExperimentConfig& config, const std::string& stage, const std::string& dir,
                    const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
                    json seeds, json extra = json::object()) {
  json m;
  m["stage"] = stage;
  m["inputs"] = hash_all(config.output_dir, inputs);
  m["outputs"] = hash_all(config.output_dir, outputs);
  m["seeds"] = std::move(seeds);
  m["seeds"]["master_seed"] = config.master_seed;
  m["rng"] = std::string(RngStream::kAlgorithmId);
  m["config"] = experiment_to_json(config);
  m["config"].erase("output_dir");
  for (auto& [k, v] : extra.items()) m[k] = v;
  write_json(config.output_dir / dir / "manifest.json", m);
}

std::vector<std::vector<int>> tokenize_all(const Vocabulary& vocab, const std::vector<std::string>& texts) {
  std::vector<std::vector<int>> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(vocab.tokenize(t));
  return out;
}

std::string fixed4(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::vector<PromptPair> probe_pairs(const std::vector<FactRecord>& records) {
  std::vector<PromptPair> pairs;
  for (const auto& r : records) {
    for (const auto& p : r.paraphrase_prompts) pairs.push_back({r.edit_prompt, p, r.subject});
  }
  return pairs;
}

json attention_summary(const AttentionScores& a) {
  auto summarize = [](const std::vector<std::vector<double>>& rows) {
    double self = 0.0, entropy = 0.0;
    for (const auto& row : rows) {
      std::size_t last = row.size();
      while (last > 0 && row[last - 1] == 0.0) --last;  // causal mask leaves trailing zeros
      if (last > 0) self += row[last - 1];
      for (double w : row) {
        if (w > 0.0) entropy -= w * std::log(w);
      }
    }
    const double n = rows.empty() ? 1.0 : static_cast<double>(rows.size());
    return json{{"rows", rows.size()}, {"mean_self_weight", self / n}, {"mean_entropy", entropy / n}};
  };
  return json{{"layer", a.layer}, {"subject", summarize(a.subject_rows)}, {"control", summarize(a.control_rows)}};
}

json lexical_to_json(const LexicalScores& s) {
  return json{{"bleu", s.bleu},       {"rouge1", s.rouge1},
              {"rouge2", s.rouge2},   {"rouge_l", s.rouge_l},
              {"scored_pairs", s.scored_pairs}, {"excluded_pairs", s.excluded_pairs}};
}

std::string losses_csv(const std::vector<double>& losses) {
  std::ostringstream os;
  os.precision(17);
  os << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) os << i << ',' << losses[i] << '\n';
  return os.str();
}

std::string delta_log_csv(const EditBatch& batch, const EditResult& result) {
  std::ostringstream os;
  os.precision(17);
  os << "case_id,step,loss,delta_norm,bound\n";
  for (std::size_t i = 0; i < result.deltas.size(); ++i) {
    for (const auto& s : result.deltas[i].log) {
      os << batch.records[i].case_id << ',' << s.step << ',' << s.loss << ',' << s.delta_norm << ',' << s.bound
         << '\n';
    }
  }
  return os.str();
}

std::vector<std::string> sweep_metric_names(const std::string& suite) {
  if (suite == "zsre") return {"Efficacy", "Paraphrase", "Specificity", "Score"};
  return {"ES", "PS", "NS", "S"};
}

struct Loaded {
  std::vector<FactRecord> records;
  ModelBundle model;
  Vocabulary vocab;
};

Loaded load_trained(const ExperimentConfig& config) {
  return {read_dataset(config.output_dir / kDataFile), load_checkpoint(config.output_dir / "model"),
          load_vocabulary(config.output_dir / "model")};
}

}  // namespace

// ---- config ---------------------------------------------------------------

std::vector<double> default_sweep_alphas() {
  std::vector<double> a;
  for (int k = 1; k <= 10; ++k) a.push_back(k / 20.0);
  return a;
}

void ExperimentConfig::validate() const {
  if (dataset_path && !fs::exists(*dataset_path)) {
    throw Error(ErrorCode::kInvalidArgument, "dataset path does not exist: " + dataset_path->string());
  }
  if (method != "memit" && method != "rome") throw Error(ErrorCode::kInvalidArgument, "unknown method '" + method + "'");
  if (suite != "zsre" && suite != "counterfacts") {
    throw Error(ErrorCode::kInvalidArgument, "unknown suite '" + suite + "'");
  }
  parse_variant(variant);
  if (alpha && !(*alpha >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be non-negative");
  for (double a : sweep_alphas) {
    if (!(a >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sweep alphas must be non-negative");
  }
  if (case_ids.empty() && edit_batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "edit batch is empty");
  if (probe_bins == 0) throw Error(ErrorCode::kInvalidArgument, "probe bins must be positive");
  if (model.contains("vocab_size")) {
    throw Error(ErrorCode::kInvalidArgument, "vocab_size is derived from the dataset");
  }
}

ExperimentConfig experiment_from_json(const json& j) {
  ExperimentConfig c;
  try {
    c.master_seed = j.value("master_seed", c.master_seed);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("dataset")) {
      const json& d = j.at("dataset");
      if (d.contains("path")) c.dataset_path = d.at("path").get<std::string>();
      c.dataset.n_subjects = d.value("n_subjects", c.dataset.n_subjects);
      c.dataset.relations = d.value("relations", c.dataset.relations);
      c.dataset.templates_per_relation = d.value("templates_per_relation", c.dataset.templates_per_relation);
      c.dataset.neighbors_per_record = d.value("neighbors_per_record", c.dataset.neighbors_per_record);
    }
    if (j.contains("model")) c.model = j.at("model");
    if (j.contains("train")) {
      const json& t = j.at("train");
      c.train.steps = t.value("steps", c.train.steps);
      c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.grad_clip = t.value("grad_clip", c.train.grad_clip);
    }
    if (j.contains("probe")) {
      const json& p = j.at("probe");
      c.probe_layers = p.value("layers", c.probe_layers);
      c.probe_bins = p.value("n_bins", c.probe_bins);
    }
    if (j.contains("edit")) {
      const json& e = j.at("edit");
      c.method = e.value("method", c.method);
      c.edit_batch_size = e.value("batch_size", c.edit_batch_size);
      c.case_ids = e.value("case_ids", c.case_ids);
      c.variant = e.value("variant", c.variant);
      if (e.contains("alpha") && !e.at("alpha").is_null()) c.alpha = e.at("alpha").get<double>();
      if (e.contains("plan")) c.plan = e.at("plan");
    }
    if (j.contains("eval")) {
      const json& e = j.at("eval");
      c.suite = e.value("suite", c.suite);
      c.max_new_tokens = e.value("max_new_tokens", c.max_new_tokens);
    }
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      c.sweep_alphas = s.value("alphas", c.sweep_alphas);
      c.run_sweep = s.value("enabled", c.run_sweep);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("experiment config: ") + e.what());
  }
  c.validate();
  return c;
}

json experiment_to_json(const ExperimentConfig& c) {
  json d{{"n_subjects", c.dataset.n_subjects},
         {"relations", c.dataset.relations},
         {"templates_per_relation", c.dataset.templates_per_relation},
         {"neighbors_per_record", c.dataset.neighbors_per_record}};
  if (c.dataset_path) d["path"] = c.dataset_path->generic_string();
  json e{{"method", c.method}, {"batch_size", c.edit_batch_size}, {"case_ids", c.case_ids},
         {"variant", c.variant}, {"plan", c.plan}};
  e["alpha"] = c.alpha ? json(*c.alpha) : json(nullptr);
  return json{{"master_seed", c.master_seed},
              {"output_dir", c.output_dir.generic_string()},
              {"dataset", d},
              {"model", c.model},
              {"train",
               {{"steps", c.train.steps},
                {"learning_rate", c.train.learning_rate},
                {"batch_size", c.train.batch_size},
                {"grad_clip", c.train.grad_clip}}},
              {"probe", {{"layers", c.probe_layers}, {"n_bins", c.probe_bins}}},
              {"edit", e},
              {"eval", {{"suite", c.suite}, {"max_new_tokens", c.max_new_tokens}}},
              {"sweep", {{"alphas", c.sweep_alphas}, {"enabled", c.run_sweep}}}};
}

ExperimentConfig load_experiment(const fs::path& path) { return experiment_from_json(read_json(path)); }

// ---- building blocks ------------------------------------------------------

FactRecall fact_recall(const ModelBundle& model, const Vocabulary& vocab, const std::vector<FactRecord>& records) {
  FactRecall r;
  auto hit = [&](const std::string& prompt, const std::string& object) {
    const auto p = vocab.tokenize(prompt);
    const auto t = vocab.tokenize(object);
    std::vector<int> full = p;
    full.insert(full.end(), t.begin(), t.end() - 1);
    return token_accuracy(forward(model, full).logits, p.size(), t) == 1.0;
  };
  for (const auto& rec : records) {
    ++r.edit_total;
    if (hit(rec.edit_prompt, rec.target_true)) ++r.edit_hits;
    for (const auto& p : rec.paraphrase_prompts) {
      ++r.paraphrase_total;
      if (hit(p, rec.target_true)) ++r.paraphrase_hits;
    }
  }
  return r;
}

ModelConfig experiment_model_config(const ExperimentConfig& config, int vocab_size) {
  json j = config_to_json(ModelConfig{});
  j["seed"] = config.master_seed;
  if (config.model.contains("ffn_kind") && !config.model.contains("activation")) j.erase("activation");
  for (auto& [k, v] : config.model.items()) j[k] = v;
  j["vocab_size"] = vocab_size;
  ModelConfig c = config_from_json(j);
  c.validate();
  return c;
}

EditBatch select_edit_batch(const ExperimentConfig& config, const std::vector<FactRecord>& records) {
  EditBatch batch;
  batch.master_seed = config.master_seed;
  if (!config.case_ids.empty()) {
    for (const auto& id : config.case_ids) {
      auto it = std::find_if(records.begin(), records.end(), [&](const FactRecord& r) { return r.case_id == id; });
      if (it == records.end()) throw Error(ErrorCode::kInvalidArgument, "unknown case id '" + id + "'");
      batch.records.push_back(*it);
    }
    return batch;
  }
  if (config.edit_batch_size > records.size()) {
    throw Error(ErrorCode::kInvalidArgument, "edit batch larger than the dataset");
  }
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng(config.master_seed, fnv1a64("edit-batch"));
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  // Distinct subjects first: records sharing a subject share the edit key.
  std::set<std::string> subjects;
  std::vector<std::size_t> repeats;
  for (std::size_t i : order) {
    if (batch.records.size() == config.edit_batch_size) break;
    if (subjects.insert(records[i].subject).second) {
      batch.records.push_back(records[i]);
    } else {
      repeats.push_back(i);
    }
  }
  for (std::size_t i = 0; batch.records.size() < config.edit_batch_size; ++i) batch.records.push_back(records[repeats[i]]);
  return batch;
}

EditPlan experiment_plan(const ExperimentConfig& config, const ModelConfig& model, std::size_t batch_size) {
  EditPlan plan = plan_from_json(config.plan, model);
  if (!config.plan.contains("noise")) {
    plan.noise = build_noise_policy(config.variant, config.alpha ? *config.alpha : default_alpha(batch_size));
  }
  plan.validate(model);
  return plan;
}

std::map<int, Tensor> plan_covariances(const ModelBundle& model, const Vocabulary& vocab,
                                       const std::vector<FactRecord>& records, const EditPlan& plan,
                                       const std::string& method) {
  const auto corpus = tokenize_all(vocab, training_texts(records));
  const std::vector<int> layers = method == "rome" ? std::vector<int>{plan.layer} : plan.critical_layers;
  return estimate_covariances(model, corpus, layers, plan.covariance_ridge);
}

EditResult run_edit(const ModelBundle& model, const Vocabulary& vocab, const EditBatch& batch, const EditPlan& plan,
                    const std::map<int, Tensor>& covariances, const std::string& method) {
  if (method == "rome") return apply_rome_batch(model, vocab, batch, plan, covariances);
  return apply_memit(model, vocab, batch, plan, covariances);
}

EditReport run_suite(const ModelBundle& model, const Vocabulary& vocab, const std::vector<FactRecord>& records,
                     const std::string& suite, std::size_t max_new_tokens) {
  if (suite == "zsre") return zsre_eval(model, vocab, records);
  return counterfacts_eval(model, vocab, records, GenerationOptions{max_new_tokens});
}

// ---- stages ---------------------------------------------------------------

void stage_gen_data(const ExperimentConfig& config) {
  run_stage(config, "gen-data", "data", [&](const fs::path&) {
    std::vector<FactRecord> records;
    if (config.dataset_path) {
      records = read_dataset(*config.dataset_path);
    } else {
      SyntheticOptions opts = config.dataset;
      opts.seed = config.master_seed;
      records = gen_synthetic_dataset(opts);
    }
    write_dataset(config.output_dir / kDataFile, records);
    write_manifest(config, "gen-data", "data", {}, {kDataFile}, json{{"dataset", config.master_seed}},
                   json{{"records", records.size()}});
  });
}

void stage_train(const ExperimentConfig& config) {
  run_stage(config, "train", "model", [&](const fs::path& dir) {
    const auto records = read_dataset(config.output_dir / kDataFile);
    const auto texts = training_texts(records);
    const Vocabulary vocab = Vocabulary::build(texts);
    const ModelConfig mc = experiment_model_config(config, static_cast<int>(vocab.size()));
    RngStream rng(config.master_seed, fnv1a64("train"));
    TrainResult trained = train_toy(mc, tokenize_all(vocab, texts), config.train, rng);
    save_checkpoint(dir, trained.model, vocab);
    write_file(dir / "losses.csv", losses_csv(trained.losses));
    const FactRecall recall = fact_recall(trained.model, vocab, records);
    write_manifest(config, "train", "model", {kDataFile}, {"model"},
                   json{{"init", mc.seed}, {"train_stream", hex64(fnv1a64("train"))}},
                   json{{"fingerprint", model_fingerprint(trained.model)},
                        {"final_loss", trained.losses.back()},
                        {"recall_edit", recall.edit_rate()},
                        {"recall_paraphrase", recall.paraphrase_rate()}});
  });
}

void stage_probe(const ExperimentConfig& config) {
  run_stage(config, "probe", "probe", [&](const fs::path& dir) {
    const Loaded in = load_trained(config);
    const auto pairs = probe_pairs(in.records);
    std::vector<int> layers = config.probe_layers;
    if (layers.empty()) {
      for (int l = 1; l <= in.model.config.n_layers; ++l) layers.push_back(l);
    }
    json report{{"pairs", pairs.size()}, {"layers", json::array()}};
    std::vector<std::string> outputs{"probe/report.json"};
    for (int l : layers) {
      const LayerProbeReport lr = probe_layer(in.model, in.vocab, pairs, l, config.probe_bins);
      report["layers"].push_back({{"layer", l},
                                  {"experimental", stats_to_json(lr.experimental)},
                                  {"control", stats_to_json(lr.control)},
                                  {"skewness_gap", lr.experimental.skewness - lr.control.skewness},
                                  {"kurtosis_gap", lr.experimental.excess_kurtosis - lr.control.excess_kurtosis}});
      const std::string name = "layer_" + std::to_string(l) + ".csv";
      write_file(dir / name, histogram_csv(lr));
      outputs.push_back("probe/" + name);
    }
    json attention = json::array();
    for (const auto& a : collect_attention_scores(in.model, in.vocab, pairs, 1, in.model.config.n_layers)) {
      attention.push_back(attention_summary(a));
    }
    report["attention"] = attention;
    report["lexical"] = lexical_to_json(lexical_similarity(pairs));
    write_json(dir / "report.json", report);
    write_manifest(config, "probe", "probe", {kDataFile, "model"}, outputs, json::object());
  });
}

void stage_edit(const ExperimentConfig& config) {
  run_stage(config, "edit", "edit", [&](const fs::path& dir) {
    const Loaded in = load_trained(config);
    const EditBatch batch = select_edit_batch(config, in.records);
    const ConflictReport conflicts = validate_batch(batch);
    if (!conflicts.ok()) throw Error(ErrorCode::kConflict, conflicts.describe());
    const EditPlan plan = experiment_plan(config, in.model.config, batch.records.size());
    const auto cov = plan_covariances(in.model, in.vocab, in.records, plan, config.method);
    const EditResult result = run_edit(in.model, in.vocab, batch, plan, cov, config.method);

    write_dataset(dir / "batch.jsonl", batch.records);
    write_json(dir / "plan.json", plan_to_json(plan));
    save_weight_delta(dir / "delta", in.model.config, result.delta);
    ModelBundle edited = in.model;
    apply_weight_delta(edited, result.delta);
    save_checkpoint(dir / "model", edited, in.vocab);
    write_file(dir / "delta_log.csv", delta_log_csv(batch, result));

    json seeds{{"batch_stream", hex64(fnv1a64("edit-batch"))}, {"noise_streams", json::object()}};
    for (const auto& r : batch.records) seeds["noise_streams"][r.case_id] = hex64(fnv1a64(r.case_id));
    write_manifest(config, "edit", "edit", {kDataFile, "model"},
                   {"edit/batch.jsonl", "edit/plan.json", "edit/delta", "edit/model", "edit/delta_log.csv"}, seeds,
                   json{{"fingerprint", model_fingerprint(edited)}});
  });
}

void stage_eval(const ExperimentConfig& config) {
  run_stage(config, "eval", "eval", [&](const fs::path& dir) {
    const Loaded in = load_trained(config);
    const auto batch = read_dataset(config.output_dir / "edit/batch.jsonl");
    ModelBundle edited = in.model;
    apply_weight_delta(edited, load_weight_delta(config.output_dir / "edit/delta"));

    EditReport pre = run_suite(in.model, in.vocab, batch, config.suite, config.max_new_tokens);
    EditReport post = run_suite(edited, in.vocab, batch, config.suite, config.max_new_tokens);
    const json plan = read_json(config.output_dir / "edit/plan.json");
    for (EditReport* r : {&pre, &post}) {
      r->config = json{{"master_seed", config.master_seed}, {"method", config.method}, {"plan", plan}};
    }
    pre.config["edited"] = false;
    post.config["edited"] = true;
    write_json(dir / "pre_report.json", report_to_json(pre));
    write_json(dir / "report.json", report_to_json(post));
    write_file(dir / "cases.csv", report_cases_csv(post));
    write_manifest(config, "eval", "eval", {kDataFile, "model", "edit/batch.jsonl", "edit/plan.json", "edit/delta"},
                   {"eval/report.json", "eval/pre_report.json", "eval/cases.csv"}, json::object());
  });
}

void stage_sweep(const ExperimentConfig& config, std::vector<double> alphas) {
  if (alphas.empty()) alphas = config.sweep_alphas.empty() ? default_sweep_alphas() : config.sweep_alphas;
  for (double a : alphas) {
    if (!(a >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "sweep alphas must be non-negative");
  }
  run_stage(config, "sweep", "sweep", [&](const fs::path& dir) {
    const Loaded in = load_trained(config);
    const EditBatch batch = select_edit_batch(config, in.records);
    const ConflictReport conflicts = validate_batch(batch);
    if (!conflicts.ok()) throw Error(ErrorCode::kConflict, conflicts.describe());
    EditPlan plan = experiment_plan(config, in.model.config, batch.records.size());
    const auto cov = plan_covariances(in.model, in.vocab, in.records, plan, config.method);
    const auto names = sweep_metric_names(config.suite);

    std::ostringstream csv;
    csv << "policy,alpha";
    for (const auto& n : names) csv << ',' << n;
    csv << '\n';
    auto row = [&](NoiseVariant variant, double alpha) {
      plan.noise = build_noise_policy(variant, alpha);
      const EditResult result = run_edit(in.model, in.vocab, batch, plan, cov, config.method);
      ModelBundle edited = in.model;
      apply_weight_delta(edited, result.delta);
      const EditReport report = run_suite(edited, in.vocab, batch.records, config.suite, config.max_new_tokens);
      csv << variant_name(variant) << ',' << fixed4(alpha);
      for (const auto& n : names) csv << ',' << fixed4(report.metrics.at(n).value);
      csv << '\n';
    };
    row(NoiseVariant::kNone, 0.0);
    const NoiseVariant variant = parse_variant(config.variant);
    for (double a : alphas) row(variant, a);
    write_file(dir / "alpha_sweep.csv", csv.str());
    write_manifest(config, "sweep", "sweep", {kDataFile, "model"}, {"sweep/alpha_sweep.csv"},
                   json{{"batch_stream", hex64(fnv1a64("edit-batch"))}}, json{{"alphas", alphas}});
  });
}

void run_pipeline(const ExperimentConfig& config) {
  config.validate();
  stage_gen_data(config);
  stage_train(config);
  stage_probe(config);
  stage_edit(config);
  stage_eval(config);
  if (config.run_sweep) stage_sweep(config);
}

}  // namespace kedit
