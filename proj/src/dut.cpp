#include "dpdlab/dut.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "dpdlab/error.hpp"

namespace dpdlab::dut {
namespace {

bool has_nonzero(const std::vector<double>& taps) {
  return std::any_of(taps.begin(), taps.end(), [](double t) { return t != 0.0; });
}

bool finite(const std::vector<double>& taps) {
  return std::all_of(taps.begin(), taps.end(), [](double t) { return std::isfinite(t); });
}

}  // namespace

void IqImbalanceConfig::validate() const {
  if (!(gain > 0) || !std::isfinite(gain) || !std::isfinite(phase_rad)) {
    throw Error(Errc::invalid_spec, "IQ gain mismatch must be positive and finite");
  }
  if (h_i.empty() || h_q.empty() || !finite(h_i) || !finite(h_q) || !has_nonzero(h_i) ||
      !has_nonzero(h_q)) {
    throw Error(Errc::invalid_spec, "IQ branch filters need finite taps and one nonzero tap");
  }
}

IqKernels iq_kernels(const IqImbalanceConfig& cfg) {
  cfg.validate();
  const std::size_t taps = std::max(cfg.h_i.size(), cfg.h_q.size());
  const cplx mismatch = cfg.gain * std::polar(1.0, cfg.phase_rad);
  IqKernels k{std::vector<cplx>(taps), std::vector<cplx>(taps)};
  for (std::size_t n = 0; n < taps; ++n) {
    const double hi = n < cfg.h_i.size() ? cfg.h_i[n] : 0.0;
    const double hq = n < cfg.h_q.size() ? cfg.h_q[n] : 0.0;
    k.k1[n] = 0.5 * (hi + mismatch * hq);
    k.k2[n] = 0.5 * (hi - mismatch * hq);
  }
  return k;
}

ComplexSignal iq_modulate(const ComplexSignal& s, const IqImbalanceConfig& cfg) {
  const auto k = iq_kernels(cfg);
  const std::size_t taps = k.k1.size();
  ComplexSignal x{std::vector<cplx>(s.size()), s.sample_rate_hz};
  for (std::size_t n = 0; n < s.size(); ++n) {
    cplx acc{};
    const std::size_t last = std::min(taps - 1, n);
    for (std::size_t m = 0; m <= last; ++m) {
      const cplx v = s.samples[n - m];
      acc += k.k1[m] * v + k.k2[m] * std::conj(v);
    }
    x.samples[n] = acc;
  }
  return x;
}

PaModel::PaModel(int memory_length) : memory_length_(memory_length) {
  if (memory_length < 0) throw Error(Errc::invalid_spec, "PA memory length must be >= 0");
  coeffs_.assign(kOrders.size() * static_cast<std::size_t>(memory_length + 1), cplx{});
}

std::size_t PaModel::slot(int order, int tap) const {
  const auto it = std::find(kOrders.begin(), kOrders.end(), order);
  if (it == kOrders.end() || tap < 0 || tap > memory_length_) {
    throw Error(Errc::invalid_spec, "PA coefficient (order " + std::to_string(order) + ", tap " +
                                        std::to_string(tap) + ") out of range");
  }
  const auto k = static_cast<std::size_t>(it - kOrders.begin());
  return k * static_cast<std::size_t>(memory_length_ + 1) + static_cast<std::size_t>(tap);
}

cplx PaModel::coefficient(int order, int tap) const { return coeffs_[slot(order, tap)]; }

void PaModel::set_coefficient(int order, int tap, cplx value) { coeffs_[slot(order, tap)] = value; }

PaModel PaModel::identity() {
  PaModel pa(0);
  pa.set_coefficient(1, 0, 1.0);
  return pa;
}

void PaModel::validate() const {
  for (const auto& c : coeffs_) {
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) {
      throw Error(Errc::invalid_spec, "PA coefficients must be finite");
    }
  }
  if (coefficient(1, 0) == cplx{}) throw Error(Errc::invalid_spec, "PA needs a nonzero a[1][0]");
}

ComplexSignal pa_forward(const ComplexSignal& x, const PaModel& pa) {
  const int depth = pa.memory_length() + 1;
  const std::size_t n_orders = PaModel::kOrders.size();
  std::vector<cplx> a(n_orders * static_cast<std::size_t>(depth));
  for (std::size_t k = 0; k < n_orders; ++k)
    for (int m = 0; m < depth; ++m) a[k * depth + m] = pa.coefficient(PaModel::kOrders[k], m);

  // Basis terms x|x|^(k-1) per sample, then the tapped sum.
  const std::size_t len = x.size();
  std::vector<cplx> basis(len * n_orders);
  for (std::size_t n = 0; n < len; ++n) {
    const cplx v = x.samples[n];
    const double mag2 = std::norm(v);
    basis[n * n_orders + 0] = v;
    basis[n * n_orders + 1] = v * mag2;
    basis[n * n_orders + 2] = v * (mag2 * mag2);
    basis[n * n_orders + 3] = v * (mag2 * mag2 * mag2);
  }
  ComplexSignal y{std::vector<cplx>(len), x.sample_rate_hz};
  for (std::size_t n = 0; n < len; ++n) {
    cplx acc{};
    const std::size_t last = std::min<std::size_t>(depth - 1, n);
    for (std::size_t m = 0; m <= last; ++m) {
      const cplx* b = &basis[(n - m) * n_orders];
      for (std::size_t k = 0; k < n_orders; ++k) acc += a[k * depth + m] * b[k];
    }
    y.samples[n] = acc;
  }
  return y;
}

PaModel perturb_for_state(const PaModel& base, int state_index, std::uint64_t seed,
                          double magnitude_fraction, double phase_deg) {
  PaModel out = base;
  std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(state_index)));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double phase_rad = phase_deg * std::numbers::pi / 180.0;
  for (int order : PaModel::kOrders) {
    if (order == 1) continue;
    for (int m = 0; m <= base.memory_length(); ++m) {
      const double scale = 1.0 + magnitude_fraction * unit(rng);
      const double rot = phase_rad * unit(rng);
      out.set_coefficient(order, m, base.coefficient(order, m) * std::polar(scale, rot));
    }
  }
  return out;
}

int IqPaChain::total_memory() const {
  int pa_memory = 0;
  for (const auto& [_, pa] : pa_per_state) pa_memory = std::max(pa_memory, pa.memory_length());
  const auto taps = std::max(iq.h_i.size(), iq.h_q.size());
  return static_cast<int>(taps) - 1 + pa_memory;
}

ComplexSignal chain_forward(const ComplexSignal& s, const IqPaChain& chain, int state_index) {
  const auto it = chain.pa_per_state.find(state_index);
  if (it == chain.pa_per_state.end()) {
    throw Error(Errc::unknown_state, "no PA model for state " + std::to_string(state_index));
  }
  return pa_forward(iq_modulate(s, chain.iq), it->second);
}

}  // namespace dpdlab::dut
