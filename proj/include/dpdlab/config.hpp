#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpdlab/dut.hpp"
#include "dpdlab/metrics.hpp"
#include "dpdlab/models.hpp"
#include "dpdlab/training.hpp"

namespace dpdlab::config {

inline constexpr const char* kSchema = "dpd-lab/1";
inline constexpr int kSchemaVersion = 1;

/// Default memory-polynomial PA: about 1.3 dB gain compression for an RMS 0.5
/// drive, with AM/AM still rising at amplitude 2.5.
dut::PaModel default_pa();

struct ChainConfig {
  double gain_mismatch = 1.1;
  double phase_mismatch_deg = 5.0;
  std::vector<double> h_i{1.0, 0.05, -0.02, 0.01};
  std::vector<double> h_q{1.0, -0.04, 0.03, -0.015};
  dut::PaModel base_pa = default_pa();
  std::uint64_t perturbation_seed = 11;
  double perturbation_magnitude = 0.10;
  double perturbation_phase_deg = 5.0;
};

struct ModelsConfig {
  int memory_length = 8;
  std::vector<std::size_t> main_dims{18, 36, 18, 12, 2};
  std::vector<std::size_t> hyper_hidden_dims{36, 28};
  std::vector<dpd::ModelKind> kinds{dpd::ModelKind::svden, dpd::ModelKind::hg_r2tdnn, dpd::ModelKind::hn_r2tdnn};
  /// States a fixed-state kind (R2TDNN, SVDEN) is trained on; empty means all.
  std::vector<int> fixed_state_train_states{1};
};

struct ExperimentConfig {
  std::uint64_t seed = 2024;
  std::string output_dir = "runs/desk";
  std::vector<double> bandwidths_hz{20e6, 30e6, 40e6};
  std::vector<double> powers_dbm{-19.0, -23.0, -27.0};
  ila::WaveformSettings waveform;
  std::size_t train_samples = 18750;
  std::size_t test_samples = 6250;
  std::size_t eval_samples = 20000;
  ChainConfig chain;
  ModelsConfig models;
  ila::TrainConfig training;
  metrics::PsdParams psd;
  double acpr_offset_factor = 1.0;
  double acpr_integration_factor = 1.0;
  /// Negative means "use the chain memory".
  long nmse_skip = -1;

  ila::StateGrid grid() const;
  dut::IqPaChain build_chain() const;
  metrics::EvaluationOptions evaluation_options() const;
};

/// Strict parse: schema tag must match and unknown keys are rejected.
/// Throws Errc::config.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Full config as text, every tunable present.
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace dpdlab::config
