#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "dpdlab/dut.hpp"
#include "dpdlab/exec.hpp"
#include "dpdlab/kernels.hpp"
#include "dpdlab/models.hpp"
#include "dpdlab/nn.hpp"
#include "dpdlab/waveform.hpp"

namespace dpdlab::ila {

struct OperatingState {
  double bandwidth_hz = 0.0;
  double power_dbm = 0.0;
  bool operator==(const OperatingState&) const = default;
};

/// The L operating points, addressed by 1-based state index.
class StateGrid {
 public:
  StateGrid() = default;
  /// Throws Errc::invalid_spec for an empty grid or non-finite entries.
  explicit StateGrid(std::vector<OperatingState> states);

  /// Bandwidth-major product: index = bw_idx * |powers| + power_idx + 1.
  static StateGrid product(std::span<const double> bandwidths_hz, std::span<const double> powers_dbm);

  std::size_t size() const noexcept { return states_.size(); }
  const OperatingState& at(int state_index) const;
  std::vector<int> indices() const;
  double bw_max_hz() const noexcept { return bw_max_; }
  /// Least negative power on the grid.
  double p_max_dbm() const noexcept { return p_max_; }
  dpd::StateVector state_vector(int state_index) const;

 private:
  std::vector<OperatingState> states_;
  double bw_max_ = 0.0;
  double p_max_ = 0.0;
};

/// Waveform parameters shared by every state; bandwidth and power come from the grid.
struct WaveformSettings {
  double sample_rate_hz = 200e6;
  int modulation_order = 16;
  double occupancy = 0.95;
  double subcarrier_spacing_hz = 15e3;
  /// Power that maps to reference_rms (digital amplitude relative to PA saturation at 1.0).
  double reference_power_dbm = -19.0;
  double reference_rms = 0.5;
};

waveform::WaveformSpec spec_for_state(const WaveformSettings& settings, const OperatingState& state,
                                      std::size_t num_samples, std::uint64_t seed);

struct StateRecord {
  int state_index = 0;
  OperatingState op;
  dpd::StateVector c;
  std::uint64_t seed = 0;
  /// Least-squares gain of the raw DUT output onto its input.
  cplx gain{1.0, 0.0};
  std::vector<cplx> input;   // y_norm = y / gain
  std::vector<cplx> target;  // s
};

struct Dataset {
  double sample_rate_hz = 0.0;
  std::size_t train_length = 0;
  StateGrid grid;
  std::vector<StateRecord> states;

  std::size_t length() const noexcept { return states.empty() ? 0 : states.front().target.size(); }
  std::size_t test_length() const noexcept { return length() - train_length; }
  /// Throws Errc::unknown_state.
  const StateRecord& state(int state_index) const;
  /// Keeps only the listed states (grid and normalization unchanged).
  Dataset subset(std::span<const int> state_indices) const;

  /// Views over the training prefix / test suffix, one per stored state.
  std::vector<kernels::StateData> train_view() const;
  std::vector<kernels::StateData> test_view() const;
};

/// sum(y * conj(s)) / sum(|s|^2)
cplx least_squares_gain(std::span<const cplx> y, std::span<const cplx> s);

/// Generates s per state, runs it through the chain, normalizes the output by
/// its least-squares gain. Throws Errc::unknown_state, Errc::degenerate_gain.
Dataset build_dataset(const dut::IqPaChain& chain, const StateGrid& grid, const WaveformSettings& waveform,
                      std::size_t length, std::size_t train_length, std::uint64_t seed);

/// One epoch of minibatches, each holding batch_size / num_states samples of
/// every state; per-state order is a seeded permutation. The last batch may be
/// short (still balanced across states).
/// Throws Errc::batch_too_small when batch_size < num_states, Errc::invalid_spec
/// when it is not a multiple of num_states.
std::vector<std::vector<kernels::SampleRef>> parallel_batches(std::size_t num_states, std::size_t train_length,
                                                              std::size_t batch_size, std::uint64_t seed);
std::vector<std::vector<kernels::SampleRef>> parallel_batches(const Dataset& dataset, std::size_t batch_size,
                                                              std::uint64_t seed);

/// J_i over the given training-sample indices. Throws Errc::index_out_of_range.
double loss_state(const dpd::DpdModel& model, const Dataset& dataset, int state_index,
                  std::span<const std::size_t> sample_indices, Exec exec = Exec::parallel);

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 900;
  nn::AdamConfig adam;
  /// Fractions of the epoch budget after which the learning rate is multiplied by lr_decay_factor.
  std::vector<double> lr_decay_at{0.6, 0.85};
  double lr_decay_factor = 0.5;
  int ila_iterations = 1;
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;

  /// Rounded up to a multiple of num_states (and at least num_states).
  std::size_t effective_batch(std::size_t num_states) const;
};

struct EpochLoss {
  std::size_t epoch = 0;
  double total = 0.0;
  std::vector<double> per_state;
};

struct TrainResult {
  std::vector<int> state_indices;
  std::vector<EpochLoss> history;
};

/// Minimizes sum_i J_i over all model parameters with parallel per-state
/// minibatches. With ila_iterations > 1 the chain is re-run with the current
/// predistorter in front and the post-inverse retrained (requires `chain`).
///
/// Throws Errc::divergence (non-finite loss), Errc::incompatible_state (state
/// normalization differs from the model's, or missing chain for iterations).
TrainResult train_ila(dpd::DpdModel& model, const Dataset& dataset, const TrainConfig& cfg,
                      const dut::IqPaChain* chain = nullptr);

struct Deployment {
  int state_index = 0;
  ComplexSignal u;
  ComplexSignal y;  // linearized DUT output
};

/// y = chain(predistort(u)) per state; a null model gives the uncompensated path.
std::vector<Deployment> deploy_and_measure(const dut::IqPaChain& chain, const dpd::DpdModel* model,
                                           const StateGrid& grid, const std::map<int, ComplexSignal>& test_signals,
                                           Exec exec = Exec::parallel);

}  // namespace dpdlab::ila
