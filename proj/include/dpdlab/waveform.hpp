#pragma once

#include <cstdint>

#include "dpdlab/signal.hpp"

namespace dpdlab::waveform {

/// Multicarrier test-signal description for one operating state.
struct WaveformSpec {
  double bandwidth_hz = 20e6;
  std::size_t num_samples = 0;
  double rms_amplitude = 0.5;
  std::uint64_t seed = 0;
  int modulation_order = 16;  // square QAM: 4, 16, 64, 256, ...
  /// Fraction of the channel bandwidth carrying subcarriers.
  double occupancy = 0.95;
  double subcarrier_spacing_hz = 15e3;
};

inline constexpr double kMinOversampling = 4.0;

/// CP-free OFDM: random QAM on DC-centered bins, one IFFT per symbol, symbols
/// concatenated, then a record-level brickwall that removes the symbol-edge
/// sidelobes. The result is scaled to exactly spec.rms_amplitude.
///
/// Throws Errc::invalid_spec for non-positive fields or a non-square
/// constellation, Errc::oversampling_too_low when fs < 4 * BW.
ComplexSignal generate_ofdm(const WaveformSpec& spec, double sample_rate_hz);

/// Scales by a single positive real factor. Throws Errc::all_zero_signal.
ComplexSignal set_rms(const ComplexSignal& signal, double target_rms);

/// ref_rms * 10^((power_dbm - ref_power_dbm) / 20)
double dbm_to_rms(double power_dbm, double ref_power_dbm, double ref_rms);

}  // namespace dpdlab::waveform
