#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kedit/error.hpp"
#include "kedit/pipeline.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

kedit::ExperimentConfig resolve(const GlobalFlags& flags) {
  kedit::ExperimentConfig cfg = flags.config.empty() ? kedit::ExperimentConfig{} : kedit::load_experiment(flags.config);
  if (flags.seed) cfg.master_seed = *flags.seed;
  if (!flags.out.empty()) cfg.output_dir = flags.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knowledge editing on a toy transformer"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--config", flags.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Master seed");
  app.add_option("--out", flags.out, "Output directory");

  std::vector<double> alphas;
  auto* gen = app.add_subcommand("gen-data", "Write the dataset");
  auto* train = app.add_subcommand("train", "Train the toy model");
  auto* probe = app.add_subcommand("probe", "Activation and attention statistics of the trained model");
  auto* edit = app.add_subcommand("edit", "Edit the trained model");
  auto* eval = app.add_subcommand("eval", "Evaluate the edited model");
  auto* sweep = app.add_subcommand("sweep-alpha", "Edit and evaluate over a range of noise scales");
  sweep->add_option("--alphas", alphas, "Noise scales (default 0.05..0.50)");
  auto* pipeline = app.add_subcommand("pipeline", "Run every stage");
  for (auto* sub : {gen, train, probe, edit, eval, sweep, pipeline}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const kedit::ExperimentConfig cfg = resolve(flags);
    if (*gen) kedit::stage_gen_data(cfg);
    if (*train) kedit::stage_train(cfg);
    if (*probe) kedit::stage_probe(cfg);
    if (*edit) kedit::stage_edit(cfg);
    if (*eval) kedit::stage_eval(cfg);
    if (*sweep) kedit::stage_sweep(cfg, alphas);
    if (*pipeline) kedit::run_pipeline(cfg);
    std::cout << "wrote " << cfg.output_dir.string() << '\n';
    return 0;
  } catch (const kedit::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kedit::is_validation_error(e.code()) ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
