#include "dpdlab/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>
#include <string>

#include "dpdlab/error.hpp"
#include "dpdlab/fft.hpp"
#include "dpdlab/waveform.hpp"

namespace dpdlab::metrics {

double power_db(double x) noexcept {
  if (!(x > 0.0)) return kDbFloor;
  return std::max(kDbFloor, 10.0 * std::log10(x));
}

double nmse_db(const ComplexSignal& reference, const ComplexSignal& test, std::size_t skip) {
  if (reference.size() != test.size()) {
    throw Error(Errc::length_mismatch, "NMSE needs equal-length signals");
  }
  if (skip >= reference.size()) throw Error(Errc::zero_reference_energy, "skip covers the whole signal");
  cplx cross{};
  double ref_energy = 0.0;
  for (std::size_t n = skip; n < reference.size(); ++n) {
    cross += test.samples[n] * std::conj(reference.samples[n]);
    ref_energy += std::norm(reference.samples[n]);
  }
  if (ref_energy == 0.0) throw Error(Errc::zero_reference_energy, "reference has no energy");
  const cplx gain(cross.real() / ref_energy, cross.imag() / ref_energy);
  const double g2 = std::norm(gain);
  double err = 0.0;
  if (g2 == 0.0) {
    err = ref_energy;
  } else {
    const cplx inv = std::conj(gain) / g2;
    for (std::size_t n = skip; n < reference.size(); ++n) {
      err += std::norm(reference.samples[n] - test.samples[n] * inv);
    }
  }
  return power_db(err / ref_energy);
}

PsdEstimate welch_psd(const ComplexSignal& signal, std::size_t segment_length, double overlap_fraction) {
  if (segment_length < 16 || signal.size() < segment_length) {
    throw Error(Errc::signal_too_short, "Welch needs segment_length >= 16 and a signal at least that long");
  }
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0)) {
    throw Error(Errc::invalid_spec, "overlap fraction must be in [0, 1)");
  }
  const std::size_t L = segment_length;
  const auto overlap = static_cast<std::size_t>(std::floor(overlap_fraction * static_cast<double>(L)));
  const std::size_t hop = std::max<std::size_t>(1, L - overlap);

  std::vector<double> window(L);
  double u = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(L));
    u += window[i] * window[i];
  }

  std::vector<double> acc(L, 0.0);
  std::vector<cplx> seg(L);
  std::size_t count = 0;
  for (std::size_t start = 0; start + L <= signal.size(); start += hop) {
    for (std::size_t i = 0; i < L; ++i) seg[i] = signal.samples[start + i] * window[i];
    const auto X = fft::forward(seg);
    for (std::size_t k = 0; k < L; ++k) acc[k] += std::norm(X[k]);
    ++count;
  }

  const double fs = signal.sample_rate_hz;
  const double scale = 1.0 / (fs * u * static_cast<double>(count));
  PsdEstimate psd;
  psd.segment_length = L;
  psd.overlap_fraction = overlap_fraction;
  psd.sample_rate_hz = fs;
  psd.segments = count;
  psd.freq_hz.resize(L);
  psd.density.resize(L);
  psd.density_db.resize(L);
  // Output bin j holds DFT index k = j - (L - 1) / 2 ... so frequencies run over (-fs/2, fs/2].
  const long first = -static_cast<long>((L - 1) / 2);
  for (std::size_t j = 0; j < L; ++j) {
    const long k = first + static_cast<long>(j);
    const std::size_t idx = static_cast<std::size_t>(k < 0 ? k + static_cast<long>(L) : k);
    psd.freq_hz[j] = static_cast<double>(k) * fs / static_cast<double>(L);
    psd.density[j] = acc[idx] * scale;
    psd.density_db[j] = power_db(psd.density[j]);
  }
  return psd;
}

double band_power(const PsdEstimate& psd, double lo_hz, double hi_hz) {
  double p = 0.0;
  for (std::size_t j = 0; j < psd.freq_hz.size(); ++j) {
    if (psd.freq_hz[j] >= lo_hz && psd.freq_hz[j] < hi_hz) p += psd.density[j];
  }
  return p * psd.bin_width_hz();
}

Acpr acpr_db(const PsdEstimate& psd, double channel_bw_hz, double offset_hz, double integration_bw_hz) {
  const double nyquist = 0.5 * psd.sample_rate_hz;
  if (!(channel_bw_hz > 0) || !(integration_bw_hz > 0) ||
      offset_hz + 0.5 * integration_bw_hz > nyquist || 0.5 * channel_bw_hz > nyquist) {
    throw Error(Errc::band_out_of_range, "adjacent band does not fit inside (-fs/2, fs/2]");
  }
  const double main = band_power(psd, -0.5 * channel_bw_hz, 0.5 * channel_bw_hz);
  const double lower = band_power(psd, -offset_hz - 0.5 * integration_bw_hz, -offset_hz + 0.5 * integration_bw_hz);
  const double upper = band_power(psd, offset_hz - 0.5 * integration_bw_hz, offset_hz + 0.5 * integration_bw_hz);
  Acpr a;
  if (main == 0.0) {
    a.lower_db = lower == 0.0 ? kDbFloor : -kDbFloor;
    a.upper_db = upper == 0.0 ? kDbFloor : -kDbFloor;
  } else {
    a.lower_db = power_db(lower / main);
    a.upper_db = power_db(upper / main);
  }
  a.mean_db = 0.5 * (a.lower_db + a.upper_db);
  return a;
}

Acpr acpr_db(const ComplexSignal& signal, double channel_bw_hz, double offset_hz, double integration_bw_hz,
             const PsdParams& params) {
  const double nyquist = 0.5 * signal.sample_rate_hz;
  if (offset_hz + 0.5 * integration_bw_hz > nyquist || 0.5 * channel_bw_hz > nyquist) {
    throw Error(Errc::band_out_of_range, "adjacent band does not fit inside (-fs/2, fs/2]");
  }
  return acpr_db(welch_psd(signal, params.segment_length, params.overlap_fraction), channel_bw_hz, offset_hz,
                 integration_bw_hz);
}

double MetricsReport::mean_nmse_db() const {
  double s = 0.0;
  for (const auto& st : states) s += st.nmse_db;
  return states.empty() ? 0.0 : s / static_cast<double>(states.size());
}

double MetricsReport::mean_acpr_db() const {
  double s = 0.0;
  for (const auto& st : states) s += st.acpr.mean_db;
  return states.empty() ? 0.0 : s / static_cast<double>(states.size());
}

const StateMetrics& MetricsReport::state(int state_index) const {
  for (const auto& s : states)
    if (s.state_index == state_index) return s;
  throw Error(Errc::unknown_state, "report has no state " + std::to_string(state_index));
}

namespace {

ComplexSignal normalized_by_gain(const ComplexSignal& y, const ComplexSignal& ref) {
  const cplx g = ila::least_squares_gain(y.samples, ref.samples);
  ComplexSignal out = y;
  const double g2 = std::norm(g);
  if (g2 == 0.0) return out;
  const cplx inv = std::conj(g) / g2;
  for (auto& v : out.samples) v *= inv;
  return out;
}

}  // namespace

Evaluation evaluate_models(const dut::IqPaChain& chain, const std::vector<NamedModel>& models,
                           const ila::StateGrid& grid, std::uint64_t test_seed, const EvaluationOptions& options) {
  std::map<int, ComplexSignal> tests;
  for (int idx : grid.indices()) {
    const auto spec = ila::spec_for_state(options.waveform, grid.at(idx), options.eval_samples,
                                          mix_seed(test_seed, static_cast<std::uint64_t>(idx)));
    tests.emplace(idx, waveform::generate_ofdm(spec, options.waveform.sample_rate_hz));
  }

  std::vector<NamedModel> rows;
  rows.push_back({kBaselineLabel, nullptr});
  rows.insert(rows.end(), models.begin(), models.end());

  Evaluation ev;
  for (const auto& row : rows) {
    const auto deployed = ila::deploy_and_measure(chain, row.model, grid, tests, options.exec);
    MetricsReport report;
    report.model = row.label;
    report.states.resize(deployed.size());
    std::vector<PsdTrace> traces(options.keep_psd ? deployed.size() : 0);
    std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (options.exec == Exec::parallel)
    for (long k = 0; k < static_cast<long>(deployed.size()); ++k) {
      try {
        const auto& d = deployed[static_cast<std::size_t>(k)];
        const auto& op = grid.at(d.state_index);
        auto& m = report.states[static_cast<std::size_t>(k)];
        m.state_index = d.state_index;
        m.bandwidth_hz = op.bandwidth_hz;
        m.power_dbm = op.power_dbm;
        m.nmse_db = nmse_db(d.u, d.y, options.nmse_skip);
        const auto psd = welch_psd(normalized_by_gain(d.y, d.u), options.psd.segment_length,
                                   options.psd.overlap_fraction);
        m.acpr = acpr_db(psd, op.bandwidth_hz, options.acpr_offset_factor * op.bandwidth_hz,
                         options.acpr_integration_factor * op.bandwidth_hz);
        if (options.keep_psd) traces[static_cast<std::size_t>(k)] = {d.state_index, row.label, psd};
      } catch (...) {
#pragma omp critical(dpdlab_eval_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    ev.reports.push_back(std::move(report));
    for (auto& t : traces) ev.psd.push_back(std::move(t));
  }
  if (options.keep_psd) {
    for (const auto& [idx, u] : tests) {
      ev.psd.push_back({idx, "input", welch_psd(u, options.psd.segment_length, options.psd.overlap_fraction)});
    }
  }
  return ev;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

void write_metrics_csv(std::ostream& os, const std::vector<MetricsReport>& reports) {
  os << "state_index,bw_mhz,power_dbm,model,nmse_db,acpr_lo,acpr_hi,acpr_mean\r\n";
  for (const auto& r : reports) {
    for (const auto& s : r.states) {
      os << s.state_index << ',' << fmt(s.bandwidth_hz / 1e6) << ',' << fmt(s.power_dbm) << ','
         << csv_field(r.model) << ',' << fmt(s.nmse_db) << ',' << fmt(s.acpr.lower_db) << ','
         << fmt(s.acpr.upper_db) << ',' << fmt(s.acpr.mean_db) << "\r\n";
    }
  }
}

void write_psd_csv(std::ostream& os, const PsdEstimate& psd) {
  os << "freq_hz,psd_db\r\n";
  for (std::size_t j = 0; j < psd.freq_hz.size(); ++j) os << fmt(psd.freq_hz[j]) << ',' << fmt(psd.density_db[j]) << "\r\n";
}

}  // namespace dpdlab::metrics
