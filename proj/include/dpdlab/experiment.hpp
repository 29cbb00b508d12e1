#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpdlab/config.hpp"
#include "dpdlab/metrics.hpp"

namespace dpdlab::experiment {

/// Content-addressed artifact names inside one experiment directory.
struct ArtifactPaths {
  std::filesystem::path dir;
  std::uint64_t seed = 0;

  std::filesystem::path config() const;
  std::filesystem::path dataset() const;
  std::filesystem::path model(dpd::ModelKind kind) const;
  std::filesystem::path loss(dpd::ModelKind kind) const;
  std::filesystem::path metrics() const;
  std::filesystem::path summary() const;
  std::filesystem::path psd_dir() const;
  std::filesystem::path psd(int state_index, const std::string& label) const;
};

ArtifactPaths artifact_paths(const config::ExperimentConfig& cfg, const std::filesystem::path& out_dir = {});

/// Seeds for each stage, all derived from the master seed.
std::uint64_t dataset_seed(std::uint64_t master);
std::uint64_t init_seed(std::uint64_t master, dpd::ModelKind kind);
std::uint64_t train_seed(std::uint64_t master, dpd::ModelKind kind);
std::uint64_t test_seed(std::uint64_t master);

/// States a kind trains on under this config.
std::vector<int> training_states(const config::ExperimentConfig& cfg, dpd::ModelKind kind);

struct RunOptions {
  /// Overrides cfg.output_dir when non-empty.
  std::filesystem::path out_dir;
  /// Progress and summaries; null silences them.
  std::ostream* log = nullptr;
};

/// Builds and persists the dataset cache. Returns its path.
std::filesystem::path cmd_gen_data(const config::ExperimentConfig& cfg, const RunOptions& opts = {});

/// Trains one kind from the cache. Returns the model path; the loss history
/// lands next to it. Throws Errc::missing_artifacts without a cache.
std::filesystem::path cmd_train(const config::ExperimentConfig& cfg, dpd::ModelKind kind,
                                const RunOptions& opts = {});

/// Evaluates the given model files (all configured kinds when empty) plus the
/// uncompensated baseline. Returns the metrics CSV path.
std::filesystem::path cmd_evaluate(const config::ExperimentConfig& cfg,
                                   const std::vector<std::filesystem::path>& model_files,
                                   const RunOptions& opts = {});

/// gen-data, train every kind, evaluate, summary. Files written by a failing
/// run are removed before the error propagates. Returns the summary path.
std::filesystem::path cmd_reproduce(const config::ExperimentConfig& cfg, const RunOptions& opts = {});

struct ModelSummary {
  std::string model;
  double mean_nmse_db = 0.0;
  double mean_acpr_db = 0.0;
};

std::vector<ModelSummary> summarize(const std::vector<metrics::MetricsReport>& reports);
std::string summary_json(const config::ExperimentConfig& cfg, const std::vector<ModelSummary>& rows);

/// Parses a metrics CSV written by write_metrics_csv back into reports.
std::vector<metrics::MetricsReport> read_metrics_csv(const std::string& text);

}  // namespace dpdlab::experiment
