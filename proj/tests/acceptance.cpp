// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "dpdlab/config.hpp"
#include "dpdlab/dut.hpp"
#include "dpdlab/error.hpp"
#include "dpdlab/experiment.hpp"
#include "dpdlab/fft.hpp"
#include "dpdlab/kernels.hpp"
#include "dpdlab/metrics.hpp"
#include "dpdlab/serialize.hpp"
#include "dpdlab/training.hpp"
#include "dpdlab/waveform.hpp"

using namespace dpdlab;
using dpd::ModelKind;
namespace fs = std::filesystem;

namespace {

constexpr ModelKind kAllKinds[] = {ModelKind::r2tdnn, ModelKind::svden, ModelKind::hg_r2tdnn, ModelKind::hn_r2tdnn};

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      if (pass) detail = what;
      pass = false;
    }
  }
};

std::vector<cplx> noise(std::size_t n, std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale / std::sqrt(2.0));
  std::vector<cplx> x(n);
  for (auto& v : x) v = {d(rng), d(rng)};
  return x;
}

dpd::DpdModel make(ModelKind k, std::uint64_t seed) {
  std::optional<std::vector<std::size_t>> h;
  if (k == ModelKind::hn_r2tdnn) h = std::vector<std::size_t>{36, 28};
  return dpd::build_model(k, 8, {18, 36, 18, 12, 2}, h, seed);
}

char buf[256];

template <typename... A>
std::string fmt(const char* f, A... a) {
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

Outcome gradient_exactness() {
  Outcome o;
  std::size_t probes_total = 0;
  double worst = 0.0;
  for (auto k : kAllKinds) {
    auto model = make(k, 31);
    std::mt19937_64 rng(1000 + static_cast<int>(k));
    std::uniform_real_distribution<double> u(-0.3, 0.3);
    for (double& v : model.params()) v = u(rng);

    std::vector<std::vector<cplx>> in, tgt;
    std::vector<kernels::StateData> states;
    for (int s = 0; s < 3; ++s) {
      in.push_back(noise(100, 50 + s, 0.5));
      tgt.push_back(noise(100, 60 + s, 0.5));
    }
    for (int s = 0; s < 3; ++s) {
      states.push_back({in[s], tgt[s], dpd::make_state_vector(20e6 + 10e6 * s, -19.0 - 4.0 * s, 40e6, -19.0)});
    }
    std::vector<kernels::SampleRef> batch;
    for (std::uint32_t i = 10; i < 16; ++i)
      for (std::uint32_t s = 0; s < 3; ++s) batch.push_back({s, i * 5 + s});

    std::vector<double> grad(model.param_count(), 0.0);
    kernels::accumulate_gradient(model, states, batch, grad, Exec::serial);
    std::uniform_int_distribution<std::size_t> pick(0, model.param_count() - 1);
    const double h = 1e-6;
    for (int p = 0; p < 125; ++p) {
      const std::size_t j = pick(rng);
      const double orig = model.params()[j];
      model.params()[j] = orig + h;
      const double fp = kernels::batch_loss(model, states, batch, Exec::serial).total;
      model.params()[j] = orig - h;
      const double fm = kernels::batch_loss(model, states, batch, Exec::serial).total;
      model.params()[j] = orig;
      const double fd = (fp - fm) / (2 * h);
      const double scale = std::max(std::abs(fd), std::abs(grad[j]));
      const double err = std::abs(fd - grad[j]);
      // Gradients below 1e-3 are compared on an absolute 1e-8 floor (FD roundoff).
      if (scale > 1e-3) worst = std::max(worst, err / scale);
      o.require(err <= 1e-5 * scale + 1e-8, fmt("%s param %zu: fd %.9g vs bp %.9g", dpd::to_string(k), j, fd, grad[j]));
      ++probes_total;
    }
  }
  if (o.pass) o.detail = fmt("%zu probes, worst relative error %.2e", probes_total, worst);
  return o;
}

Outcome impairment_identities() {
  Outcome o;
  const auto s = noise(512, 7, 0.5);
  const auto x = dut::iq_modulate({s, 200e6}, dut::IqImbalanceConfig::ideal());
  o.require(x.samples == s, "ideal IQ config does not return s exactly");

  config::ExperimentConfig cfg;
  const auto iq = cfg.build_chain().iq;
  const auto kk = dut::iq_kernels(iq);
  const auto y = dut::iq_modulate({s, 200e6}, iq);
  double worst = 0.0;
  for (std::size_t n = 0; n < s.size(); ++n) {
    cplx ref = 0.0;
    for (std::size_t m = 0; m < kk.k1.size() && m <= n; ++m) ref += kk.k1[m] * s[n - m];
    for (std::size_t m = 0; m < kk.k2.size() && m <= n; ++m) ref += kk.k2[m] * std::conj(s[n - m]);
    worst = std::max(worst, std::abs(ref - y.samples[n]));
  }
  o.require(worst <= 1e-12, fmt("K1/K2 decomposition error %.3e", worst));

  double worst_h = 0.0;
  for (int k : dut::PaModel::kOrders) {
    dut::PaModel pa(2);
    pa.set_coefficient(1, 0, 0.0);
    pa.set_coefficient(k, 0, {0.4, -0.1});
    pa.set_coefficient(k, 1, {-0.05, 0.02});
    const double c = 1.9;
    std::vector<cplx> sc(s);
    for (auto& v : sc) v *= c;
    const auto a = dut::pa_forward({sc, 200e6}, pa).samples;
    const auto b = dut::pa_forward({s, 200e6}, pa).samples;
    const double f = std::pow(c, k);
    for (std::size_t n = 0; n < a.size(); ++n) worst_h = std::max(worst_h, std::abs(a[n] - f * b[n]) / std::max(1.0, std::abs(a[n])));
  }
  o.require(worst_h <= 1e-12, fmt("PA homogeneity error %.3e", worst_h));
  if (o.pass) o.detail = fmt("decomposition %.1e, homogeneity %.1e", worst, worst_h);
  return o;
}

Outcome identity_at_zero() {
  Outcome o;
  const auto c = dpd::make_state_vector(30e6, -23, 40e6, -19);
  for (auto k : {ModelKind::r2tdnn, ModelKind::hg_r2tdnn, ModelKind::hn_r2tdnn}) {
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      auto m = make(k, seed);
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(-1, 1);
      for (double& v : m.params()) v = u(rng);
      if (k == ModelKind::hn_r2tdnn) {
        const auto& last = m.hyper().slice(m.hyper().depth() - 1);
        std::fill(m.params().begin() + static_cast<std::ptrdiff_t>(m.hyper_offset() + last.weights), m.params().end(), 0.0);
      } else {
        auto head = m.params().subspan(m.head_offset(), m.head_size());
        std::fill(head.begin(), head.end(), 0.0);
      }
      const ComplexSignal sig{noise(1000, 90 + seed, 1.0), 200e6};
      const auto y = dpd::predistort_signal(m, sig, dpd::uses_state(k) ? std::optional(c) : std::nullopt);
      o.require(y.samples == sig.samples, std::string(dpd::to_string(k)) + " is not an exact identity");
    }
  }
  if (o.pass) o.detail = "R2TDNN, HG-R2TDNN, HN-R2TDNN exact over 4 random signals each";
  return o;
}

Outcome parallel_batching() {
  Outcome o;
  const std::size_t L = 3, Q = 300;
  std::size_t checked = 0;
  for (std::size_t batch = L; batch <= L * Q; batch += L) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto batches = ila::parallel_batches(L, Q, batch, seed);
      const std::size_t per = batch / L;
      std::vector<std::vector<int>> seen(L, std::vector<int>(Q, 0));
      for (std::size_t b = 0; b < batches.size(); ++b) {
        std::vector<std::size_t> count(L, 0);
        for (const auto& r : batches[b]) {
          ++count[r.state];
          ++seen[r.state][r.index];
        }
        const bool last = b + 1 == batches.size();
        const std::size_t want = (last && Q % per) ? Q % per : per;
        for (std::size_t s = 0; s < L; ++s) o.require(count[s] == want, fmt("batch %zu: state %zu has %zu of %zu", batch, s, count[s], want));
      }
      for (std::size_t s = 0; s < L; ++s)
        for (std::size_t n = 0; n < Q; ++n) o.require(seen[s][n] == 1, fmt("batch %zu: sample (%zu,%zu) seen %d times", batch, s, n, seen[s][n]));
      ++checked;
    }
  }
  bool rejects = false;
  try {
    ila::parallel_batches(L, Q, 2, 0);
  } catch (const Error& e) {
    rejects = e.code() == Errc::batch_too_small;
  }
  o.require(rejects, "batch smaller than L accepted");
  if (o.pass) o.detail = fmt("L=3 Q=300, %zu (batch, seed) epochs exhaustively covered", checked);
  return o;
}

Outcome metric_correctness() {
  Outcome o;
  const double fs_hz = 200e6;
  const ComplexSignal ref{noise(5000, 1, 0.5), fs_hz};
  ComplexSignal test = ref;
  const auto n2 = noise(5000, 2, 0.02);
  for (std::size_t i = 0; i < ref.size(); ++i) test.samples[i] += n2[i];
  const double base = metrics::nmse_db(ref, test);
  double worst = 0.0;
  for (cplx g : {cplx(0.01, 0), cplx(3, -4), cplx(0, 250), cplx(-1e3, 1e-3)}) {
    ComplexSignal t = test;
    for (auto& v : t.samples) v *= g;
    worst = std::max(worst, std::abs(metrics::nmse_db(ref, t) - base));
  }
  o.require(worst <= 1e-9, fmt("NMSE gain invariance off by %.3e dB", worst));

  const auto ofdm = waveform::generate_ofdm({20e6, 200000, 0.5, 3}, fs_hz);
  const auto psd = metrics::welch_psd(ofdm, 4096, 0.5);
  const double parseval = metrics::band_power(psd, -fs_hz, fs_hz) / mean_power(ofdm.view());
  o.require(std::abs(parseval - 1.0) < 0.01, fmt("Parseval ratio %.4f", parseval));

  const auto white = metrics::acpr_db(ComplexSignal{noise(4096 * 64, 4, 1.0), fs_hz}, 20e6, 20e6, 20e6);
  o.require(std::abs(white.lower_db) <= 0.5 && std::abs(white.upper_db) <= 0.5,
            fmt("white-noise ACPR %.3f / %.3f dB", white.lower_db, white.upper_db));

  // Periodic signal with all energy inside the channel.
  auto X = fft::forward(noise(4096, 5, 1.0));
  for (std::size_t k = 0; k < 4096; ++k) {
    const double f = (k <= 2048 ? double(k) : double(k) - 4096.0) * fs_hz / 4096.0;
    if (std::abs(f) >= 10e6 - 4 * fs_hz / 4096.0) X[k] = 0.0;
  }
  const auto period = fft::inverse(X);
  std::vector<cplx> bw;
  for (int p = 0; p < 16; ++p) bw.insert(bw.end(), period.begin(), period.end());
  const auto brick = metrics::acpr_db(ComplexSignal{bw, fs_hz}, 20e6, 20e6, 20e6);
  o.require(brick.lower_db <= -250 && brick.upper_db <= -250, fmt("brickwall ACPR %.1f / %.1f dB", brick.lower_db, brick.upper_db));
  if (o.pass) {
    o.detail = fmt("gain invariance %.1e dB, Parseval %.4f, white %.2f dB, brickwall %.0f dB", worst, parseval, white.mean_db,
                   brick.mean_db);
  }
  return o;
}

struct EndToEnd {
  Outcome ordering;
  Outcome determinism;
};

EndToEnd end_to_end(const fs::path& workdir) {
  EndToEnd r;
  const auto cfg = config::load_config(fs::path(DPDLAB_SOURCE_DIR) / "configs" / "desk.cfg");
  experiment::RunOptions a, b;
  a.out_dir = workdir / "desk_a";
  b.out_dir = workdir / "desk_b";
  fs::remove_all(a.out_dir);
  fs::remove_all(b.out_dir);
  experiment::cmd_reproduce(cfg, a);
  experiment::cmd_reproduce(cfg, b);

  const auto pa = experiment::artifact_paths(cfg, a.out_dir);
  const auto pb = experiment::artifact_paths(cfg, b.out_dir);
  const auto ta = io::read_text_file(pa.metrics()), tb = io::read_text_file(pb.metrics());
  r.determinism.require(ta == tb, "metrics CSVs differ between runs");
  if (r.determinism.pass) r.determinism.detail = fmt("two reproduce runs, identical %zu-byte metrics CSV", ta.size());

  const auto reports = experiment::read_metrics_csv(ta);
  std::map<std::string, const metrics::MetricsReport*> by;
  for (const auto& rep : reports) by[rep.model] = &rep;
  auto& o = r.ordering;
  const std::string svden = dpd::to_string(ModelKind::svden), hg = dpd::to_string(ModelKind::hg_r2tdnn),
                    hn = dpd::to_string(ModelKind::hn_r2tdnn);
  for (const auto& name : {std::string(metrics::kBaselineLabel), svden, hg, hn}) {
    if (!by.count(name)) {
      o.require(false, "metrics CSV lacks " + name);
      return r;
    }
  }
  const auto& base = *by[metrics::kBaselineLabel];

  // (a) at least 10 dB NMSE gain over no-DPD in every training state
  double min_gain = 1e9;
  for (auto k : cfg.models.kinds) {
    const auto& rep = *by[dpd::to_string(k)];
    for (int s : experiment::training_states(cfg, k)) {
      const double g = base.state(s).nmse_db - rep.state(s).nmse_db;
      min_gain = std::min(min_gain, g);
      o.require(g >= 10.0, fmt("(a) %s state %d improves only %.2f dB", dpd::to_string(k), s, g));
    }
  }
  // (b) HN better than HG better than SVDEN on both averages
  const auto& S = *by[svden];
  const auto& G = *by[hg];
  const auto& N = *by[hn];
  o.require(N.mean_nmse_db() < G.mean_nmse_db() && G.mean_nmse_db() < S.mean_nmse_db(),
            fmt("(b) mean NMSE HN %.2f HG %.2f SVDEN %.2f", N.mean_nmse_db(), G.mean_nmse_db(), S.mean_nmse_db()));
  o.require(N.mean_acpr_db() < G.mean_acpr_db() && G.mean_acpr_db() < S.mean_acpr_db(),
            fmt("(b) mean ACPR HN %.2f HG %.2f SVDEN %.2f", N.mean_acpr_db(), G.mean_acpr_db(), S.mean_acpr_db()));
  // (c) SVDEN trained on state 1 degrades by 5 dB or more on at least 6 of the 8 other states
  int degraded = 0, off = 0;
  for (const auto& st : S.states) {
    if (st.state_index == 1) continue;
    ++off;
    if (st.nmse_db - S.state(1).nmse_db >= 5.0) ++degraded;
  }
  o.require(degraded >= 6, fmt("(c) SVDEN degrades >= 5 dB on %d of %d off-states", degraded, off));
  if (o.pass) {
    o.detail = fmt("min gain %.1f dB; NMSE HN %.2f < HG %.2f < SVDEN %.2f; ACPR HN %.2f < HG %.2f < SVDEN %.2f; SVDEN degraded %d/%d",
                   min_gain, N.mean_nmse_db(), G.mean_nmse_db(), S.mean_nmse_db(), N.mean_acpr_db(), G.mean_acpr_db(),
                   S.mean_acpr_db(), degraded, off);
  }
  return r;
}

// Solves the complex normal equations A^H A b = A^H y by Gaussian elimination.
std::vector<cplx> least_squares(const std::vector<std::vector<cplx>>& cols, const std::vector<cplx>& y) {
  const std::size_t p = cols.size();
  std::vector<std::vector<cplx>> m(p, std::vector<cplx>(p + 1));
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t n = 0; n < y.size(); ++n) m[i][j] += std::conj(cols[i][n]) * cols[j][n];
    for (std::size_t n = 0; n < y.size(); ++n) m[i][p] += std::conj(cols[i][n]) * y[n];
  }
  for (std::size_t c = 0; c < p; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < p; ++r)
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    std::swap(m[c], m[piv]);
    for (std::size_t r = 0; r < p; ++r) {
      if (r == c) continue;
      const cplx f = m[r][c] / m[c][c];
      for (std::size_t j = c; j <= p; ++j) m[r][j] -= f * m[c][j];
    }
  }
  std::vector<cplx> b(p);
  for (std::size_t i = 0; i < p; ++i) b[i] = m[i][p] / m[i][i];
  return b;
}

std::vector<std::vector<cplx>> odd_basis(const std::vector<cplx>& x) {
  std::vector<std::vector<cplx>> cols;
  for (int k = 1; k <= 9; k += 2) {
    std::vector<cplx> c(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) c[n] = x[n] * std::pow(std::abs(x[n]), k - 1);
    cols.push_back(std::move(c));
  }
  return cols;
}

Outcome post_inverse_oracle() {
  Outcome o;
  const std::vector<double> bw{20e6}, p{-19};
  const auto grid = ila::StateGrid::product(bw, p);
  dut::IqPaChain chain;
  dut::PaModel pa(0);
  pa.set_coefficient(1, 0, 1.0);
  pa.set_coefficient(3, 0, cplx(-0.05, 0.1));  // mild compression plus AM/PM, monotone AM/AM
  chain.pa_per_state.emplace(1, pa);

  ila::WaveformSettings ws;
  ws.reference_rms = 0.5;
  const auto ds = ila::build_dataset(chain, grid, ws, 12000, 10000, 77);
  auto model = dpd::build_model(ModelKind::r2tdnn, 8, {18, 36, 18, 12, 2}, std::nullopt, 5);
  model.bw_max_hz = grid.bw_max_hz();
  model.p_max_dbm = grid.p_max_dbm();
  ila::TrainConfig tc;
  tc.epochs = 60;
  tc.batch_size = 100;
  tc.seed = 9;
  ila::train_ila(model, ds, tc);

  // Brute-force inverse: odd polynomial mapping y_norm back to s on the same training data.
  const auto& st = ds.states.front();
  const std::vector<cplx> yin(st.input.begin(), st.input.begin() + 10000), tgt(st.target.begin(), st.target.begin() + 10000);
  const auto coeffs = least_squares(odd_basis(yin), tgt);

  const auto u = waveform::generate_ofdm(ila::spec_for_state(ws, grid.at(1), 20000, 4242), ws.sample_rate_hz);
  const auto y_nn = ila::deploy_and_measure(chain, &model, grid, {{1, u}}).front().y;
  ComplexSignal x_poly = u;
  const auto basis = odd_basis(u.samples);
  for (std::size_t n = 0; n < u.size(); ++n) {
    cplx v = 0.0;
    for (std::size_t k = 0; k < coeffs.size(); ++k) v += coeffs[k] * basis[k][n];
    x_poly.samples[n] = v;
  }
  const auto y_poly = dut::chain_forward(x_poly, chain, 1);
  const auto y_none = ila::deploy_and_measure(chain, nullptr, grid, {{1, u}}).front().y;

  const double nn_db = metrics::nmse_db(u, y_nn, 8);
  const double poly_db = metrics::nmse_db(u, y_poly, 8);
  const double none_db = metrics::nmse_db(u, y_none, 8);
  o.require(nn_db <= -30.0, fmt("ILA-trained NMSE %.2f dB", nn_db));
  o.require(poly_db <= -30.0, fmt("polynomial inverse NMSE %.2f dB", poly_db));
  o.require(nn_db < none_db - 6.0 && poly_db < none_db - 6.0, fmt("no-DPD %.2f dB is not clearly worse", none_db));
  o.detail = fmt("no-DPD %.2f dB, ILA network %.2f dB, LS polynomial inverse %.2f dB", none_db, nn_db, poly_db);
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  fs::path workdir = fs::temp_directory_path() / "dpd_acceptance";
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--workdir") == 0) workdir = argv[i + 1];
    if (std::strcmp(argv[i], "--only") == 0) only.insert(std::atoi(argv[i + 1]));
  }
  const auto wanted = [&](int n) { return only.empty() || only.count(n) > 0; };

  int failures = 0;
  const auto report = [&](int n, const char* name, const std::function<Outcome()>& fn) {
    if (!wanted(n)) return;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "gradient exactness", gradient_exactness);
  report(2, "impairment identities", impairment_identities);
  report(3, "identity at zero", identity_at_zero);
  report(4, "parallel batching", parallel_batching);
  report(5, "metric correctness", metric_correctness);
  EndToEnd e2e;
  std::string e2e_error;
  try {
    if (wanted(6) || wanted(7)) e2e = end_to_end(workdir);
  } catch (const std::exception& e) {
    e2e_error = std::string("exception: ") + e.what();
    e2e.ordering = {false, e2e_error};
    e2e.determinism = {false, e2e_error};
  }
  report(6, "end-to-end ordering", [&] { return e2e.ordering; });
  report(7, "determinism", [&] { return e2e.determinism; });
  report(8, "post-inverse oracle", post_inverse_oracle);
  return failures == 0 ? 0 : 1;
}
