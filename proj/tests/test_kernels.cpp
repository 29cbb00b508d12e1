#include <doctest.h>

#include <omp.h>

#include "dpdlab/error.hpp"
#include "dpdlab/kernels.hpp"
#include "oracles.hpp"

using namespace dpdlab;
using dpd::ModelKind;
using kernels::SampleRef;
using kernels::StateData;

namespace {

struct Problem {
  dpd::DpdModel model;
  std::vector<std::vector<cplx>> in, tgt;
  std::vector<StateData> states;
  std::vector<SampleRef> batch;
};

Problem make_problem(ModelKind kind, std::size_t num_states, std::size_t per_state, std::uint64_t seed) {
  Problem p;
  std::optional<std::vector<std::size_t>> h;
  if (kind == ModelKind::hn_r2tdnn) h = std::vector<std::size_t>{36, 28};
  p.model = dpd::build_model(kind, 8, {18, 36, 18, 12, 2}, h, seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-0.3, 0.3);
  for (double& v : p.model.params()) v = u(rng);
  p.in.resize(num_states);
  p.tgt.resize(num_states);
  for (std::size_t s = 0; s < num_states; ++s) {
    p.in[s] = oracle::random_signal(200, seed * 10 + s);
    p.tgt[s] = oracle::random_signal(200, seed * 10 + s + 5);
  }
  for (std::size_t s = 0; s < num_states; ++s) {
    const double bw = 20e6 + 10e6 * static_cast<double>(s % 3);
    const double pw = -19.0 - 4.0 * static_cast<double>(s / 3);
    p.states.push_back({p.in[s], p.tgt[s], dpd::make_state_vector(bw, pw, 40e6, -19.0)});
  }
  std::uniform_int_distribution<std::uint32_t> idx(0, 199);
  for (std::size_t i = 0; i < per_state; ++i) {
    for (std::uint32_t s = 0; s < num_states; ++s) p.batch.push_back({s, idx(rng)});
  }
  return p;
}

// Loss evaluated by an independent per-sample loop over predistort_sample.
double brute_loss(const Problem& p, std::vector<double>* per_state = nullptr) {
  double total = 0.0;
  if (per_state) per_state->assign(p.states.size(), 0.0);
  for (const auto& r : p.batch) {
    const auto& st = p.states[r.state];
    const auto w = dpd::make_input_window(st.input, r.index, p.model.memory_length());
    const auto y = dpd::predistort_sample(p.model, w, st.c);
    const double e = std::norm(st.target[r.index] - cplx(y[0], y[1]));
    total += e;
    if (per_state) (*per_state)[r.state] += e;
  }
  return total;
}

}  // namespace

TEST_CASE("batch_loss matches a brute-force loop and splits per state") {
  for (auto k : {ModelKind::r2tdnn, ModelKind::svden, ModelKind::hg_r2tdnn, ModelKind::hn_r2tdnn}) {
    auto p = make_problem(k, 3, 40, 2);
    std::vector<double> per;
    const double ref = brute_loss(p, &per);
    for (auto ex : {Exec::serial, Exec::parallel}) {
      const auto bl = kernels::batch_loss(p.model, p.states, p.batch, ex);
      CHECK(std::abs(bl.total - ref) <= 1e-10 * ref);
      double sum = 0.0;
      for (std::size_t s = 0; s < 3; ++s) {
        CHECK(std::abs(bl.per_state[s] - per[s]) <= 1e-10 * ref);
        sum += bl.per_state[s];
      }
      CHECK(std::abs(sum - bl.total) <= 1e-10 * bl.total);
    }
  }
}

TEST_CASE("gradients of every kind match central finite differences") {
  for (auto k : {ModelKind::r2tdnn, ModelKind::svden, ModelKind::hg_r2tdnn, ModelKind::hn_r2tdnn}) {
    auto p = make_problem(k, 3, 4, 7 + static_cast<int>(k));
    std::vector<double> grad(p.model.param_count(), 0.0);
    kernels::accumulate_gradient(p.model, p.states, p.batch, grad, Exec::serial);
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<std::size_t> pick(0, p.model.param_count() - 1);
    const double h = 1e-6;
    // Probe every region (trunk, head/shortcut, hypernetwork) plus random picks.
    std::vector<std::size_t> probes{0, p.model.head_offset(), p.model.param_count() - 1};
    if (p.model.shortcut_size()) probes.push_back(p.model.shortcut_offset());
    while (probes.size() < 120) probes.push_back(pick(rng));
    for (auto j : probes) {
      const double orig = p.model.params()[j];
      p.model.params()[j] = orig + h;
      const double fp = kernels::batch_loss(p.model, p.states, p.batch, Exec::serial).total;
      p.model.params()[j] = orig - h;
      const double fm = kernels::batch_loss(p.model, p.states, p.batch, Exec::serial).total;
      p.model.params()[j] = orig;
      const double fd = (fp - fm) / (2 * h);
      CAPTURE(dpd::to_string(k));
      CAPTURE(j);
      CHECK(std::abs(fd - grad[j]) <= 1e-5 * std::max(std::abs(fd), std::abs(grad[j])) + 1e-8);
    }
  }
}

TEST_CASE("gradient accumulates into the output buffer") {
  auto p = make_problem(ModelKind::svden, 2, 5, 3);
  std::vector<double> g1(p.model.param_count(), 0.0), g2(p.model.param_count(), 1.0);
  kernels::accumulate_gradient(p.model, p.states, p.batch, g1, Exec::serial);
  kernels::accumulate_gradient(p.model, p.states, p.batch, g2, Exec::serial);
  for (std::size_t i = 0; i < g1.size(); ++i) CHECK(g2[i] == doctest::Approx(g1[i] + 1.0).epsilon(1e-14));
  std::vector<double> bad(3);
  CHECK_THROWS_AS(kernels::accumulate_gradient(p.model, p.states, p.batch, bad, Exec::serial), Error);
}

TEST_CASE("serial and parallel kernels agree and the parallel path ignores thread count") {
  for (auto k : {ModelKind::hg_r2tdnn, ModelKind::hn_r2tdnn}) {
    auto p = make_problem(k, 9, 37, 5);
    std::vector<double> gs(p.model.param_count(), 0.0);
    const auto ls = kernels::accumulate_gradient(p.model, p.states, p.batch, gs, Exec::serial);
    std::vector<double> first;
    for (int threads : {1, 2, 3}) {
      omp_set_num_threads(threads);
      std::vector<double> gp(p.model.param_count(), 0.0);
      const auto lp = kernels::accumulate_gradient(p.model, p.states, p.batch, gp, Exec::parallel);
      CHECK(std::abs(lp.total - ls.total) <= 1e-12 * ls.total);
      for (std::size_t i = 0; i < gp.size(); ++i) CHECK(std::abs(gp[i] - gs[i]) <= 1e-12 * (1.0 + std::abs(gs[i])));
      if (first.empty()) first = gp;
      CHECK(gp == first);
    }
    omp_set_num_threads(omp_get_num_procs());
  }
}

TEST_CASE("bad sample references are rejected") {
  auto p = make_problem(ModelKind::r2tdnn, 2, 2, 1);
  std::vector<SampleRef> bad{{0, 500}};
  CHECK_THROWS_AS(kernels::batch_loss(p.model, p.states, bad, Exec::serial), Error);
  std::vector<SampleRef> bad_state{{5, 0}};
  CHECK_THROWS_AS(kernels::batch_loss(p.model, p.states, bad_state, Exec::parallel), Error);
}
