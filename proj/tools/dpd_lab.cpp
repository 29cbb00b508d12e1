// dpd-lab: dataset generation, training, evaluation and full reproduction runs.
#include <CLI11.hpp>
#include <iostream>
#include <optional>

#include "dpdlab/error.hpp"
#include "dpdlab/experiment.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace dpdlab;

  CLI::App app{"Joint IQ-imbalance / PA predistortion laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::string kind_name;
  std::vector<std::string> model_files;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment config file")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides the config)");
    sub->add_option("--seed", seed, "Master seed (overrides the config)");
  };
  auto* gen = app.add_subcommand("gen-data", "Build and cache the per-state dataset");
  add_common(gen);
  auto* train = app.add_subcommand("train", "Train one model kind from the cached dataset");
  add_common(train);
  train->add_option("--kind", kind_name, "R2TDNN, SVDEN, HG-R2TDNN or HN-R2TDNN")->required();
  auto* eval = app.add_subcommand("evaluate", "Evaluate trained models against the uncompensated chain");
  add_common(eval);
  eval->add_option("--kind", kind_name, "Evaluate only this kind's model file");
  eval->add_option("models", model_files, "Model files (default: every configured kind)");
  auto* repro = app.add_subcommand("reproduce", "gen-data, train all kinds, evaluate, summarize");
  add_common(repro);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  config::ExperimentConfig cfg;
  std::optional<dpd::ModelKind> kind;
  try {
    cfg = config::load_config(config_path);
    if (seed) cfg.seed = *seed;
    if (!kind_name.empty()) kind = dpd::kind_from_string(kind_name);
  } catch (const Error& e) {
    std::cerr << "dpd-lab: config error: " << e.what() << '\n';
    return kExitConfig;
  }

  experiment::RunOptions opts;
  opts.out_dir = out_dir;
  opts.log = &std::cout;
  try {
    if (gen->parsed()) {
      experiment::cmd_gen_data(cfg, opts);
    } else if (train->parsed()) {
      experiment::cmd_train(cfg, *kind, opts);
    } else if (eval->parsed()) {
      std::vector<std::filesystem::path> files(model_files.begin(), model_files.end());
      if (kind) files.push_back(experiment::artifact_paths(cfg, out_dir).model(*kind));
      experiment::cmd_evaluate(cfg, files, opts);
    } else {
      experiment::cmd_reproduce(cfg, opts);
    }
  } catch (const Error& e) {
    std::cerr << "dpd-lab: " << to_string(e.code()) << ": " << e.what() << '\n';
    return e.code() == Errc::config ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "dpd-lab: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
