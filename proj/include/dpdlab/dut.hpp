#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "dpdlab/signal.hpp"

namespace dpdlab::dut {

/// Gain/phase mismatch plus branch filters of a non-ideal IQ modulator.
struct IqImbalanceConfig {
  double gain = 1.0;       // g
  double phase_rad = 0.0;  // theta
  std::vector<double> h_i{1.0};
  std::vector<double> h_q{1.0};

  static IqImbalanceConfig ideal() { return {}; }
  /// Throws Errc::invalid_spec.
  void validate() const;
};

struct IqKernels {
  std::vector<cplx> k1;
  std::vector<cplx> k2;
};

/// K1 = (h_I + g e^{j theta} h_Q) / 2, K2 = (h_I - g e^{j theta} h_Q) / 2.
/// Filters of unequal length are zero-extended to the longer one.
IqKernels iq_kernels(const IqImbalanceConfig& cfg);

/// x = s * K1 + conj(s) * K2, causal, same length as s, zero history.
ComplexSignal iq_modulate(const ComplexSignal& s, const IqImbalanceConfig& cfg);

/// Memory polynomial with odd orders 1, 3, 5, 7:
///   y(n) = sum_k sum_m a[k][m] x(n-m) |x(n-m)|^(k-1)
class PaModel {
 public:
  static constexpr std::array<int, 4> kOrders{1, 3, 5, 7};

  PaModel() : PaModel(0) {}
  explicit PaModel(int memory_length);

  int memory_length() const noexcept { return memory_length_; }
  cplx coefficient(int order, int tap) const;
  void set_coefficient(int order, int tap, cplx value);

  /// Purely linear, unit gain, memoryless.
  static PaModel identity();
  /// Throws Errc::invalid_spec when a[1][0] == 0 or a coefficient is not finite.
  void validate() const;

 private:
  std::size_t slot(int order, int tap) const;

  int memory_length_;
  std::vector<cplx> coeffs_;  // [order slot][tap]
};

ComplexSignal pa_forward(const ComplexSignal& x, const PaModel& pa);

/// Deterministic per-state variation of the nonlinear (k >= 3) coefficients:
/// each is scaled by (1 + U(-magnitude_fraction, +magnitude_fraction)) and
/// rotated by U(-phase_deg, +phase_deg). Keyed by (seed, state_index).
PaModel perturb_for_state(const PaModel& base, int state_index, std::uint64_t seed,
                          double magnitude_fraction, double phase_deg);

/// Simulated device under test: IQ modulator followed by a per-state PA.
struct IqPaChain {
  IqImbalanceConfig iq;
  std::map<int, PaModel> pa_per_state;

  /// T - 1 + max M_PA over states.
  int total_memory() const;
  bool has_state(int state_index) const { return pa_per_state.count(state_index) != 0; }
};

/// Throws Errc::unknown_state.
ComplexSignal chain_forward(const ComplexSignal& s, const IqPaChain& chain, int state_index);

}  // namespace dpdlab::dut
