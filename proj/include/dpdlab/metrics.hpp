#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "dpdlab/dut.hpp"
#include "dpdlab/models.hpp"
#include "dpdlab/signal.hpp"
#include "dpdlab/training.hpp"

namespace dpdlab::metrics {

/// Value reported for exact-zero powers and ratios.
inline constexpr double kDbFloor = -300.0;

/// 10 log10(x), floored at kDbFloor.
double power_db(double x) noexcept;

/// 10 log10( sum_{n>=skip} |ref - test/G|^2 / sum_{n>=skip} |ref|^2 ), G the
/// least-squares gain of test onto ref. Throws Errc::length_mismatch,
/// Errc::zero_reference_energy.
double nmse_db(const ComplexSignal& reference, const ComplexSignal& test, std::size_t skip = 0);

struct PsdEstimate {
  std::vector<double> freq_hz;     // DC-centered, ascending, spans (-fs/2, fs/2]
  std::vector<double> density;     // linear, power per Hz
  std::vector<double> density_db;  // power_db(density)
  std::size_t segment_length = 0;
  double overlap_fraction = 0.0;
  std::string window = "hann";
  double sample_rate_hz = 0.0;
  std::size_t segments = 0;

  double bin_width_hz() const noexcept { return sample_rate_hz / static_cast<double>(segment_length); }
};

/// Averaged periodic-Hann periodograms. Throws Errc::signal_too_short when the
/// signal is shorter than the segment or the segment is below 16 samples.
PsdEstimate welch_psd(const ComplexSignal& signal, std::size_t segment_length, double overlap_fraction);

/// Power integrated over bins with lo <= f < hi.
double band_power(const PsdEstimate& psd, double lo_hz, double hi_hz);

struct PsdParams {
  std::size_t segment_length = 4096;
  double overlap_fraction = 0.5;
};

struct Acpr {
  double lower_db = 0.0;
  double upper_db = 0.0;
  double mean_db = 0.0;
};

/// Adjacent-to-main channel power ratio on each side; mean_db averages the two
/// dB values. Throws Errc::band_out_of_range.
Acpr acpr_db(const ComplexSignal& signal, double channel_bw_hz, double offset_hz, double integration_bw_hz,
             const PsdParams& psd = {});
Acpr acpr_db(const PsdEstimate& psd, double channel_bw_hz, double offset_hz, double integration_bw_hz);

struct StateMetrics {
  int state_index = 0;
  double bandwidth_hz = 0.0;
  double power_dbm = 0.0;
  double nmse_db = 0.0;
  Acpr acpr;
};

struct MetricsReport {
  std::string model;
  std::vector<StateMetrics> states;

  double mean_nmse_db() const;
  double mean_acpr_db() const;
  const StateMetrics& state(int state_index) const;
};

inline constexpr const char* kBaselineLabel = "no-DPD";

struct EvaluationOptions {
  PsdParams psd;
  /// ACPR offset and integration bandwidth as multiples of the channel bandwidth.
  double acpr_offset_factor = 1.0;
  double acpr_integration_factor = 1.0;
  /// Leading samples excluded from NMSE.
  std::size_t nmse_skip = 0;
  std::size_t eval_samples = 20000;
  ila::WaveformSettings waveform;
  bool keep_psd = false;
  Exec exec = Exec::parallel;
};

struct NamedModel {
  std::string label;
  const dpd::DpdModel* model = nullptr;
};

struct PsdTrace {
  int state_index = 0;
  std::string label;  // "input", kBaselineLabel, or a model label
  PsdEstimate psd;
};

struct Evaluation {
  std::vector<MetricsReport> reports;  // baseline first, then models in order
  std::vector<PsdTrace> psd;
};

/// Fresh per-state test signals from test_seed, each model deployed on every
/// grid state, plus the uncompensated baseline.
Evaluation evaluate_models(const dut::IqPaChain& chain, const std::vector<NamedModel>& models,
                           const ila::StateGrid& grid, std::uint64_t test_seed, const EvaluationOptions& options);

/// Header: state_index,bw_mhz,power_dbm,model,nmse_db,acpr_lo,acpr_hi,acpr_mean
void write_metrics_csv(std::ostream& os, const std::vector<MetricsReport>& reports);
/// Header: freq_hz,psd_db
void write_psd_csv(std::ostream& os, const PsdEstimate& psd);

}  // namespace dpdlab::metrics
