#include "dpdlab/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "dpdlab/error.hpp"

namespace dpdlab::ila {

StateGrid::StateGrid(std::vector<OperatingState> states) : states_(std::move(states)) {
  if (states_.empty()) throw Error(Errc::invalid_spec, "state grid is empty");
  bw_max_ = states_.front().bandwidth_hz;
  p_max_ = states_.front().power_dbm;
  for (const auto& s : states_) {
    if (!std::isfinite(s.bandwidth_hz) || !std::isfinite(s.power_dbm) || !(s.bandwidth_hz > 0)) {
      throw Error(Errc::invalid_spec, "state bandwidths must be positive and powers finite");
    }
    bw_max_ = std::max(bw_max_, s.bandwidth_hz);
    p_max_ = std::max(p_max_, s.power_dbm);
  }
}

StateGrid StateGrid::product(std::span<const double> bandwidths_hz, std::span<const double> powers_dbm) {
  std::vector<OperatingState> states;
  for (double bw : bandwidths_hz)
    for (double p : powers_dbm) states.push_back({bw, p});
  return StateGrid(std::move(states));
}

const OperatingState& StateGrid::at(int state_index) const {
  if (state_index < 1 || static_cast<std::size_t>(state_index) > states_.size()) {
    throw Error(Errc::unknown_state, "state " + std::to_string(state_index) + " is not on the grid");
  }
  return states_[static_cast<std::size_t>(state_index - 1)];
}

std::vector<int> StateGrid::indices() const {
  std::vector<int> idx(states_.size());
  std::iota(idx.begin(), idx.end(), 1);
  return idx;
}

dpd::StateVector StateGrid::state_vector(int state_index) const {
  const auto& s = at(state_index);
  return dpd::make_state_vector(s.bandwidth_hz, s.power_dbm, bw_max_, p_max_);
}

waveform::WaveformSpec spec_for_state(const WaveformSettings& settings, const OperatingState& state,
                                      std::size_t num_samples, std::uint64_t seed) {
  waveform::WaveformSpec spec;
  spec.bandwidth_hz = state.bandwidth_hz;
  spec.num_samples = num_samples;
  spec.rms_amplitude = waveform::dbm_to_rms(state.power_dbm, settings.reference_power_dbm, settings.reference_rms);
  spec.seed = seed;
  spec.modulation_order = settings.modulation_order;
  spec.occupancy = settings.occupancy;
  spec.subcarrier_spacing_hz = settings.subcarrier_spacing_hz;
  return spec;
}

const StateRecord& Dataset::state(int state_index) const {
  for (const auto& s : states)
    if (s.state_index == state_index) return s;
  throw Error(Errc::unknown_state, "dataset has no state " + std::to_string(state_index));
}

Dataset Dataset::subset(std::span<const int> state_indices) const {
  Dataset out;
  out.sample_rate_hz = sample_rate_hz;
  out.train_length = train_length;
  out.grid = grid;
  for (int idx : state_indices) out.states.push_back(state(idx));
  return out;
}

std::vector<kernels::StateData> Dataset::train_view() const {
  std::vector<kernels::StateData> v;
  for (const auto& s : states) {
    v.push_back({std::span<const cplx>(s.input).first(train_length),
                 std::span<const cplx>(s.target).first(train_length), s.c});
  }
  return v;
}

std::vector<kernels::StateData> Dataset::test_view() const {
  std::vector<kernels::StateData> v;
  for (const auto& s : states) {
    v.push_back({std::span<const cplx>(s.input).subspan(train_length),
                 std::span<const cplx>(s.target).subspan(train_length), s.c});
  }
  return v;
}

cplx least_squares_gain(std::span<const cplx> y, std::span<const cplx> s) {
  if (y.size() != s.size()) throw Error(Errc::length_mismatch, "gain estimate needs equal lengths");
  cplx num{};
  double den = 0.0;
  for (std::size_t n = 0; n < s.size(); ++n) {
    num += y[n] * std::conj(s[n]);
    den += std::norm(s[n]);
  }
  if (den == 0.0) throw Error(Errc::degenerate_gain, "reference signal has zero energy");
  return cplx(num.real() / den, num.imag() / den);
}

namespace {

cplx divide_by_gain(cplx v, cplx g) {
  const double g2 = std::norm(g);
  return v * std::conj(g) / g2;
}

}  // namespace

Dataset build_dataset(const dut::IqPaChain& chain, const StateGrid& grid, const WaveformSettings& waveform,
                      std::size_t length, std::size_t train_length, std::uint64_t seed) {
  if (length == 0 || train_length == 0 || train_length > length) {
    throw Error(Errc::invalid_spec, "dataset needs 0 < train_length <= length");
  }
  for (int idx : grid.indices()) {
    if (!chain.has_state(idx)) throw Error(Errc::unknown_state, "chain has no PA for state " + std::to_string(idx));
  }
  Dataset ds;
  ds.sample_rate_hz = waveform.sample_rate_hz;
  ds.train_length = train_length;
  ds.grid = grid;
  ds.states.resize(grid.size());

  const auto indices = grid.indices();
  std::exception_ptr failure;
#pragma omp parallel for schedule(static)
  for (long k = 0; k < static_cast<long>(indices.size()); ++k) {
    try {
      const int idx = indices[static_cast<std::size_t>(k)];
      StateRecord rec;
      rec.state_index = idx;
      rec.op = grid.at(idx);
      rec.c = grid.state_vector(idx);
      rec.seed = mix_seed(seed, static_cast<std::uint64_t>(idx));
      const auto s = waveform::generate_ofdm(spec_for_state(waveform, rec.op, length, rec.seed),
                                             waveform.sample_rate_hz);
      const auto y = dut::chain_forward(s, chain, idx);
      rec.gain = least_squares_gain(y.samples, s.samples);
      if (std::abs(rec.gain) < 1e-9) {
        throw Error(Errc::degenerate_gain, "state " + std::to_string(idx) + " has near-zero linear gain");
      }
      rec.input.resize(length);
      for (std::size_t n = 0; n < length; ++n) rec.input[n] = divide_by_gain(y.samples[n], rec.gain);
      rec.target = s.samples;
      ds.states[static_cast<std::size_t>(k)] = std::move(rec);
    } catch (...) {
#pragma omp critical(dpdlab_dataset_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return ds;
}

std::vector<std::vector<kernels::SampleRef>> parallel_batches(std::size_t num_states, std::size_t train_length,
                                                              std::size_t batch_size, std::uint64_t seed) {
  if (num_states == 0) throw Error(Errc::invalid_spec, "no states to batch");
  if (batch_size < num_states) {
    throw Error(Errc::batch_too_small, "batch of " + std::to_string(batch_size) + " cannot hold " +
                                           std::to_string(num_states) + " states");
  }
  if (batch_size % num_states != 0) {
    throw Error(Errc::invalid_spec, "batch size must be a multiple of the state count");
  }
  const std::size_t per_state = batch_size / num_states;

  std::vector<std::vector<std::uint32_t>> order(num_states);
  for (std::size_t s = 0; s < num_states; ++s) {
    auto& o = order[s];
    o.resize(train_length);
    std::iota(o.begin(), o.end(), 0u);
    std::mt19937_64 rng(mix_seed(seed, s));
    std::shuffle(o.begin(), o.end(), rng);
  }

  std::vector<std::vector<kernels::SampleRef>> batches;
  for (std::size_t start = 0; start < train_length; start += per_state) {
    const std::size_t take = std::min(per_state, train_length - start);
    std::vector<kernels::SampleRef> b;
    b.reserve(take * num_states);
    for (std::size_t s = 0; s < num_states; ++s)
      for (std::size_t k = 0; k < take; ++k) b.push_back({static_cast<std::uint32_t>(s), order[s][start + k]});
    batches.push_back(std::move(b));
  }
  return batches;
}

std::vector<std::vector<kernels::SampleRef>> parallel_batches(const Dataset& dataset, std::size_t batch_size,
                                                              std::uint64_t seed) {
  return parallel_batches(dataset.states.size(), dataset.train_length, batch_size, seed);
}

double loss_state(const dpd::DpdModel& model, const Dataset& dataset, int state_index,
                  std::span<const std::size_t> sample_indices, Exec exec) {
  std::size_t slot = dataset.states.size();
  for (std::size_t s = 0; s < dataset.states.size(); ++s)
    if (dataset.states[s].state_index == state_index) slot = s;
  if (slot == dataset.states.size()) {
    throw Error(Errc::unknown_state, "dataset has no state " + std::to_string(state_index));
  }
  const auto view = dataset.train_view();
  std::vector<kernels::SampleRef> refs;
  refs.reserve(sample_indices.size());
  for (auto n : sample_indices) {
    if (n >= dataset.train_length) {
      throw Error(Errc::index_out_of_range, "sample " + std::to_string(n) + " outside the training split");
    }
    refs.push_back({static_cast<std::uint32_t>(slot), static_cast<std::uint32_t>(n)});
  }
  return kernels::batch_loss(model, view, refs, exec).total;
}

std::size_t TrainConfig::effective_batch(std::size_t num_states) const {
  if (num_states == 0) return batch_size;
  const std::size_t b = std::max(batch_size, num_states);
  return (b + num_states - 1) / num_states * num_states;
}

namespace {

void check_normalization(dpd::DpdModel& model, const Dataset& dataset) {
  if (!dpd::uses_state(model.kind())) return;
  const double bw = dataset.grid.bw_max_hz();
  const double p = dataset.grid.p_max_dbm();
  if (model.bw_max_hz == 0.0 && model.p_max_dbm == 0.0) {
    model.bw_max_hz = bw;
    model.p_max_dbm = p;
    return;
  }
  if (model.bw_max_hz != bw || model.p_max_dbm != p) {
    throw Error(Errc::incompatible_state, "model state normalization differs from the dataset grid");
  }
}

double learning_rate_for(const TrainConfig& cfg, std::size_t epoch) {
  double lr = cfg.adam.learning_rate;
  for (double frac : cfg.lr_decay_at) {
    const auto milestone = static_cast<std::size_t>(std::floor(frac * static_cast<double>(cfg.epochs)));
    if (epoch >= milestone) lr *= cfg.lr_decay_factor;
  }
  return lr;
}

}  // namespace

TrainResult train_ila(dpd::DpdModel& model, const Dataset& dataset, const TrainConfig& cfg,
                      const dut::IqPaChain* chain) {
  if (dataset.states.empty()) throw Error(Errc::invalid_spec, "dataset has no states");
  if (cfg.ila_iterations < 1) throw Error(Errc::invalid_spec, "ILA iteration count must be >= 1");
  if (cfg.ila_iterations > 1 && chain == nullptr) {
    throw Error(Errc::incompatible_state, "repeated ILA iterations need the DUT chain");
  }
  check_normalization(model, dataset);

  TrainResult result;
  for (const auto& s : dataset.states) result.state_indices.push_back(s.state_index);
  model.trained_states = result.state_indices;

  const std::size_t n_states = dataset.states.size();
  const std::size_t batch = cfg.effective_batch(n_states);
  nn::OptimizerState opt(model.param_count(), cfg.adam);
  std::vector<double> grad(model.param_count());

  // Storage for re-captured pairs on later ILA iterations.
  std::vector<std::vector<cplx>> inputs, targets;
  auto view = dataset.train_view();
  std::size_t global_epoch = 0;

  for (int iter = 0; iter < cfg.ila_iterations; ++iter) {
    if (iter > 0) {
      inputs.assign(n_states, {});
      targets.assign(n_states, {});
      for (std::size_t s = 0; s < n_states; ++s) {
        const auto& rec = dataset.states[s];
        const ComplexSignal u{rec.target, dataset.sample_rate_hz};
        auto x = dpd::predistort_signal(model, u, rec.c, cfg.exec);
        const auto y = dut::chain_forward(x, *chain, rec.state_index);
        inputs[s].resize(y.size());
        for (std::size_t n = 0; n < y.size(); ++n) inputs[s][n] = divide_by_gain(y.samples[n], rec.gain);
        targets[s] = std::move(x.samples);
        view[s].input = std::span<const cplx>(inputs[s]).first(dataset.train_length);
        view[s].target = std::span<const cplx>(targets[s]).first(dataset.train_length);
      }
    }
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch, ++global_epoch) {
      opt.config.learning_rate = learning_rate_for(cfg, epoch);
      const auto batches = parallel_batches(n_states, dataset.train_length, batch, mix_seed(cfg.seed, global_epoch));
      EpochLoss rec{global_epoch + 1, 0.0, std::vector<double>(n_states, 0.0)};
      for (const auto& b : batches) {
        std::fill(grad.begin(), grad.end(), 0.0);
        const auto loss = kernels::accumulate_gradient(model, view, b, grad, cfg.exec);
        if (!std::isfinite(loss.total)) {
          throw Error(Errc::divergence, "non-finite loss at epoch " + std::to_string(global_epoch + 1));
        }
        for (std::size_t s = 0; s < n_states; ++s) rec.per_state[s] += loss.per_state[s];
        nn::adam_step(model.params(), grad, opt);
      }
      for (double l : rec.per_state) rec.total += l;
      result.history.push_back(std::move(rec));
    }
  }
  return result;
}

std::vector<Deployment> deploy_and_measure(const dut::IqPaChain& chain, const dpd::DpdModel* model,
                                           const StateGrid& grid, const std::map<int, ComplexSignal>& test_signals,
                                           Exec exec) {
  std::vector<Deployment> out;
  for (const auto& [idx, u] : test_signals) {
    grid.at(idx);
    if (!chain.has_state(idx)) throw Error(Errc::unknown_state, "chain has no PA for state " + std::to_string(idx));
    out.push_back({idx, u, {}});
  }
  if (model && dpd::uses_state(model->kind()) && model->bw_max_hz != 0.0 &&
      (model->bw_max_hz != grid.bw_max_hz() || model->p_max_dbm != grid.p_max_dbm())) {
    throw Error(Errc::incompatible_state, "model state normalization differs from the evaluation grid");
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic) if (exec == Exec::parallel)
  for (long k = 0; k < static_cast<long>(out.size()); ++k) {
    try {
      auto& d = out[static_cast<std::size_t>(k)];
      const ComplexSignal x =
          model ? dpd::predistort_signal(*model, d.u, grid.state_vector(d.state_index), Exec::serial) : d.u;
      d.y = dut::chain_forward(x, chain, d.state_index);
    } catch (...) {
#pragma omp critical(dpdlab_deploy_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace dpdlab::ila
