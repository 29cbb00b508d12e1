#include "dpdlab/waveform.hpp"

#include <cmath>
#include <random>

#include "dpdlab/error.hpp"
#include "dpdlab/fft.hpp"

namespace dpdlab {

double mean_power(std::span<const cplx> x) noexcept {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc / static_cast<double>(x.size());
}

double rms(std::span<const cplx> x) noexcept { return std::sqrt(mean_power(x)); }

bool all_finite(std::span<const cplx> x) noexcept {
  for (const auto& v : x)
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  return true;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace waveform {
namespace {

int qam_side(int order) {
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(order))));
  if (order < 4 || side * side != order) {
    throw Error(Errc::invalid_spec, "modulation_order must be a square QAM size >= 4");
  }
  return side;
}

}  // namespace

ComplexSignal generate_ofdm(const WaveformSpec& spec, double sample_rate_hz) {
  if (!(spec.bandwidth_hz > 0) || spec.num_samples == 0 || !(spec.rms_amplitude > 0) ||
      !(sample_rate_hz > 0) || !(spec.occupancy > 0 && spec.occupancy <= 1) ||
      !(spec.subcarrier_spacing_hz > 0)) {
    throw Error(Errc::invalid_spec, "waveform fields must be positive (occupancy in (0, 1])");
  }
  if (sample_rate_hz < kMinOversampling * spec.bandwidth_hz) {
    throw Error(Errc::oversampling_too_low, "sample rate must be at least 4x the bandwidth");
  }
  const int side = qam_side(spec.modulation_order);

  const auto nfft = static_cast<std::size_t>(std::lround(sample_rate_hz / spec.subcarrier_spacing_hz));
  if (nfft < 2) throw Error(Errc::invalid_spec, "subcarrier spacing too coarse for the sample rate");
  const double occupied_hz = spec.occupancy * spec.bandwidth_hz;
  const auto nbins = std::max<long>(
      1, std::lround(occupied_hz / sample_rate_hz * static_cast<double>(nfft)));
  const long first_bin = -nbins / 2;

  std::mt19937_64 rng(spec.seed);
  std::uniform_int_distribution<int> level(0, side - 1);
  const double half = 0.5 * (side - 1);

  std::vector<cplx> record;
  record.reserve(spec.num_samples + nfft);
  std::vector<cplx> grid(nfft);
  while (record.size() < spec.num_samples) {
    std::fill(grid.begin(), grid.end(), cplx{});
    for (long b = 0; b < nbins; ++b) {
      const long k = first_bin + b;
      const auto idx = static_cast<std::size_t>(k < 0 ? k + static_cast<long>(nfft) : k);
      const double re = level(rng) - half;
      const double im = level(rng) - half;
      grid[idx] = cplx(re, im);
    }
    const auto symbol = fft::inverse(grid);
    record.insert(record.end(), symbol.begin(), symbol.end());
  }
  record.resize(spec.num_samples);

  // Record-level brickwall just outside the occupied edge.
  const std::size_t n = record.size();
  auto spectrum = fft::forward(record);
  const double cutoff = 0.5 * occupied_hz + 0.5 * spec.subcarrier_spacing_hz;
  for (std::size_t k = 0; k < n; ++k) {
    const long signed_k = k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
    const double f = static_cast<double>(signed_k) * sample_rate_hz / static_cast<double>(n);
    if (std::abs(f) > cutoff) spectrum[k] = cplx{};
  }
  ComplexSignal out{fft::inverse(spectrum), sample_rate_hz};
  return set_rms(out, spec.rms_amplitude);
}

ComplexSignal set_rms(const ComplexSignal& signal, double target_rms) {
  if (!(target_rms > 0)) throw Error(Errc::invalid_spec, "target RMS must be positive");
  const double current = rms(signal.samples);
  if (signal.empty() || current == 0.0) {
    throw Error(Errc::all_zero_signal, "RMS of an all-zero signal is undefined");
  }
  const double factor = target_rms / current;
  ComplexSignal out = signal;
  for (auto& v : out.samples) v *= factor;
  return out;
}

double dbm_to_rms(double power_dbm, double ref_power_dbm, double ref_rms) {
  if (!(ref_rms > 0)) throw Error(Errc::invalid_spec, "reference RMS must be positive");
  return ref_rms * std::pow(10.0, (power_dbm - ref_power_dbm) / 20.0);
}

}  // namespace waveform
}  // namespace dpdlab
