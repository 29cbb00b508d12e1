#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "dpdlab/error.hpp"
#include "dpdlab/fft.hpp"
#include "dpdlab/waveform.hpp"
#include "oracles.hpp"

using namespace dpdlab;
using waveform::WaveformSpec;

namespace {

double direct_rms(const ComplexSignal& s) {
  double acc = 0.0;
  for (auto v : s.samples) acc += std::norm(v);
  return std::sqrt(acc / static_cast<double>(s.size()));
}

// Two-sided power spectrum from one full-length periodogram, with bin frequencies.
void periodogram(const ComplexSignal& s, std::vector<double>& f, std::vector<double>& p) {
  const auto X = fft::forward(s.samples);
  const std::size_t n = X.size();
  f.resize(n);
  p.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double kk = k <= n / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    f[k] = kk * s.sample_rate_hz / static_cast<double>(n);
    p[k] = std::norm(X[k]);
  }
}

// Smallest symmetric-about-DC band holding `fraction` of the power, in Hz.
double occupied_bw(const ComplexSignal& s, double fraction) {
  std::vector<double> f, p;
  periodogram(s, f, p);
  std::vector<std::size_t> idx(f.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return std::abs(f[a]) < std::abs(f[b]); });
  const double total = std::accumulate(p.begin(), p.end(), 0.0);
  double acc = 0.0;
  for (auto i : idx) {
    acc += p[i];
    if (acc >= fraction * total) return 2.0 * std::abs(f[i]);
  }
  return s.sample_rate_hz;
}

}  // namespace

TEST_CASE("generate_ofdm honours length and RMS") {
  const WaveformSpec spec{20e6, 60000, 0.5, 7};
  const auto s = waveform::generate_ofdm(spec, 200e6);
  CHECK(s.size() == 60000);
  CHECK(s.sample_rate_hz == 200e6);
  CHECK(std::abs(direct_rms(s) - 0.5) / 0.5 < 1e-9);
  CHECK(all_finite(s.view()));
}

TEST_CASE("generate_ofdm is deterministic per seed") {
  const WaveformSpec spec{30e6, 5000, 0.3, 99};
  const auto a = waveform::generate_ofdm(spec, 200e6);
  const auto b = waveform::generate_ofdm(spec, 200e6);
  CHECK(a.samples == b.samples);
  WaveformSpec other = spec;
  other.seed = 100;
  CHECK(waveform::generate_ofdm(other, 200e6).samples != a.samples);
}

TEST_CASE("occupied bandwidth tracks the requested bandwidth") {
  for (double bw : {20e6, 30e6, 40e6}) {
    const auto s = waveform::generate_ofdm({bw, 60000, 0.5, 3}, 200e6);
    const double obw = occupied_bw(s, 0.99);
    CAPTURE(bw);
    CHECK(obw >= 0.9 * bw);
    CHECK(obw <= 1.1 * bw);
  }
}

TEST_CASE("property: spectral containment within 0.6 BW of DC") {
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const double bw = 10e6 * static_cast<double>(1 + seed % 4);
    const auto s = waveform::generate_ofdm({bw, 8000 + 1000 * seed, 0.2, seed, seed % 2 ? 16 : 64}, 200e6);
    std::vector<double> f, p;
    periodogram(s, f, p);
    double in = 0.0, total = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      total += p[k];
      if (std::abs(f[k]) <= 0.6 * bw) in += p[k];
    }
    CHECK(in / total >= 0.97);
  }
}

TEST_CASE("generate_ofdm rejects bad specs") {
  CHECK_THROWS_AS(waveform::generate_ofdm({60e6, 1000, 0.5, 1}, 200e6), Error);
  try {
    waveform::generate_ofdm({60e6, 1000, 0.5, 1}, 200e6);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::oversampling_too_low);
  }
  for (const WaveformSpec bad : {WaveformSpec{0.0, 100, 0.5, 1}, WaveformSpec{20e6, 0, 0.5, 1},
                                 WaveformSpec{20e6, 100, -1.0, 1}, WaveformSpec{20e6, 100, 0.5, 1, 8}}) {
    try {
      waveform::generate_ofdm(bad, 200e6);
      FAIL("expected invalid_spec");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::invalid_spec);
    }
  }
}

TEST_CASE("set_rms scales by one positive factor") {
  const auto x = oracle::signal(oracle::random_signal(1000, 8));
  const auto y = waveform::set_rms(x, 0.5);
  CHECK(std::abs(direct_rms(y) - 0.5) / 0.5 < 1e-12);
  const double k = y.samples[0].real() / x.samples[0].real();
  CHECK(k > 0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(y.samples[i] - k * x.samples[i]) < 1e-14);

  const auto unit = waveform::set_rms(x, 1.0);
  const auto quarter = waveform::set_rms(unit, 0.25);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(quarter.samples[i] - 0.25 * unit.samples[i]) < 1e-15);

  const auto two = waveform::set_rms(x, 2.0);
  const auto again = waveform::set_rms(two, 2.0);
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(again.samples[i] - two.samples[i]) <= 1e-15 * std::abs(two.samples[i]));
}

TEST_CASE("property: set_rms composes") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto x = oracle::signal(oracle::random_signal(64 + seed, seed));
    const double a = 0.1 + 0.2 * static_cast<double>(seed), b = 3.0 / (1.0 + static_cast<double>(seed));
    const auto lhs = waveform::set_rms(waveform::set_rms(x, a), b);
    const auto rhs = waveform::set_rms(x, b);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(lhs.samples[i] - rhs.samples[i]) <= 1e-12 * std::abs(rhs.samples[i]) + 1e-300);
  }
}

TEST_CASE("set_rms rejects all-zero input") {
  ComplexSignal z{std::vector<cplx>(10), 1.0};
  try {
    waveform::set_rms(z, 1.0);
    FAIL("expected all_zero_signal");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::all_zero_signal);
  }
}

TEST_CASE("dbm_to_rms") {
  CHECK(waveform::dbm_to_rms(-19, -19, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(waveform::dbm_to_rms(-25, -19, 0.5) == doctest::Approx(0.5 * std::pow(10.0, -6.0 / 20.0)).epsilon(1e-14));
  CHECK(waveform::dbm_to_rms(-25, -19, 0.5) == doctest::Approx(0.25059).epsilon(1e-4));
  CHECK(std::abs(waveform::dbm_to_rms(-13, -19, 0.5) - 1.0) < 3e-3);
  CHECK(waveform::dbm_to_rms(-13, -19, 0.5) == doctest::Approx(0.99763).epsilon(1e-5));
}
