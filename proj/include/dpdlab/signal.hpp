#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace dpdlab {

using cplx = std::complex<double>;

/// Sampled complex baseband sequence. Used for the DUT input, IQ-modulator
/// output, PA output, DPD input and the linearized output alike.
struct ComplexSignal {
  std::vector<cplx> samples;
  double sample_rate_hz = 1.0;

  std::size_t size() const noexcept { return samples.size(); }
  bool empty() const noexcept { return samples.empty(); }
  std::span<const cplx> view() const noexcept { return samples; }
};

double mean_power(std::span<const cplx> x) noexcept;
double rms(std::span<const cplx> x) noexcept;
bool all_finite(std::span<const cplx> x) noexcept;

/// splitmix64 finalizer; derives independent sub-seeds from a master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) noexcept;

}  // namespace dpdlab
