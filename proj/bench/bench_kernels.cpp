// Serial reference vs OpenMP kernels: batch gradient and sliding-window predistortion.
#include <benchmark/benchmark.h>

#include <random>

#include "dpdlab/kernels.hpp"
#include "dpdlab/models.hpp"

namespace {

using namespace dpdlab;

struct Fixture {
  dpd::DpdModel model;
  std::vector<std::vector<cplx>> inputs, targets;
  std::vector<kernels::StateData> states;
  std::vector<kernels::SampleRef> batch;
  ComplexSignal signal;

  explicit Fixture(dpd::ModelKind kind) {
    std::optional<std::vector<std::size_t>> hyper;
    if (kind == dpd::ModelKind::hn_r2tdnn) hyper = std::vector<std::size_t>{36, 28};
    model = dpd::build_model(kind, 8, {18, 36, 18, 12, 2}, hyper, 7);
    // Nonzero output layer so the benchmark does real work everywhere.
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.05);
    for (double& p : model.params()) p += n(rng);

    const std::size_t len = 4096;
    constexpr int kStates = 9;
    inputs.resize(kStates);
    targets.resize(kStates);
    for (int s = 0; s < kStates; ++s) {
      for (std::size_t i = 0; i < len; ++i) {
        inputs[s].emplace_back(n(rng) * 8, n(rng) * 8);
        targets[s].emplace_back(n(rng) * 8, n(rng) * 8);
      }
      states.push_back({inputs[s], targets[s], dpd::make_state_vector(20e6 + 10e6 * (s / 3), -19.0 - 4 * (s % 3), 40e6, -19.0)});
    }
    for (std::uint32_t i = 0; i < 100; ++i) {
      for (std::uint32_t s = 0; s < kStates; ++s) batch.push_back({s, i * 37 % static_cast<std::uint32_t>(len)});
    }
    signal.samples = inputs[0];
    signal.sample_rate_hz = 200e6;
  }
};

void gradient(benchmark::State& state, dpd::ModelKind kind, Exec exec) {
  Fixture f(kind);
  std::vector<double> grad(f.model.param_count());
  for (auto _ : state) {
    std::fill(grad.begin(), grad.end(), 0.0);
    auto loss = kernels::accumulate_gradient(f.model, f.states, f.batch, grad, exec);
    benchmark::DoNotOptimize(loss.total);
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * f.batch.size()));
}

void predistort(benchmark::State& state, dpd::ModelKind kind, Exec exec) {
  Fixture f(kind);
  const auto c = f.states[0].c;
  for (auto _ : state) {
    auto out = dpd::predistort_signal(f.model, f.signal, c, exec);
    benchmark::DoNotOptimize(out.samples.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * f.signal.size()));
}

BENCHMARK_CAPTURE(gradient, hg_serial, dpd::ModelKind::hg_r2tdnn, Exec::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(gradient, hg_parallel, dpd::ModelKind::hg_r2tdnn, Exec::parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(gradient, hn_serial, dpd::ModelKind::hn_r2tdnn, Exec::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(gradient, hn_parallel, dpd::ModelKind::hn_r2tdnn, Exec::parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(predistort, hn_serial, dpd::ModelKind::hn_r2tdnn, Exec::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(predistort, hn_parallel, dpd::ModelKind::hn_r2tdnn, Exec::parallel)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
