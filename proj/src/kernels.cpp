#include "dpdlab/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <string>

#include "dpdlab/error.hpp"
#include "model_detail.hpp"

namespace dpdlab {
namespace kernels {
namespace {

using dpd::DpdModel;
using dpd::ModelKind;
using dpd::OutputLayer;

struct Heads {
  std::vector<OutputLayer> layers;  // per state slot (HN) or a single shared head
  std::vector<nn::Tape> hyper_tapes;
  std::vector<char> used;

  const OutputLayer& for_state(std::size_t s) const { return layers.size() == 1 ? layers[0] : layers[s]; }
};

void check_batch(const DpdModel& model, std::span<const StateData> states, std::span<const SampleRef> batch) {
  for (const auto& ref : batch) {
    if (ref.state >= states.size()) throw Error(Errc::index_out_of_range, "batch refers to an unknown state slot");
    const auto& sd = states[ref.state];
    if (ref.index >= sd.input.size() || ref.index >= sd.target.size()) {
      throw Error(Errc::index_out_of_range, "sample index " + std::to_string(ref.index) + " outside state data");
    }
  }
  (void)model;
}

Heads prepare_heads(const DpdModel& model, std::span<const StateData> states, std::span<const SampleRef> batch) {
  Heads h;
  if (!model.has_hyper()) {
    h.layers.push_back(dpd::output_layer(model, std::nullopt));
    return h;
  }
  h.layers.resize(states.size());
  h.hyper_tapes.resize(states.size());
  h.used.assign(states.size(), 0);
  for (const auto& ref : batch) h.used[ref.state] = 1;
  const std::size_t hd = model.hidden_dim();
  for (std::size_t s = 0; s < states.size(); ++s) {
    if (!h.used[s]) continue;
    auto& tape = h.hyper_tapes[s];
    tape = model.hyper().make_tape();
    model.hyper().forward(model.hyper_params(), states[s].c.c, tape);
    const auto& out = tape.u.back();
    auto& layer = h.layers[s];
    layer.hidden_dim = hd;
    layer.weights.assign(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(2 * hd));
    layer.bias = {out[2 * hd], out[2 * hd + 1]};
  }
  return h;
}

struct Workspace {
  nn::Tape tape;
  std::vector<double> input;
  std::vector<double> hidden_grad;

  explicit Workspace(const DpdModel& model)
      : tape(model.trunk().make_tape()), input(model.input_dim()), hidden_grad(model.hidden_dim()) {}
};

void load_input(const DpdModel& model, const StateData& sd, std::size_t n, Workspace& ws) {
  dpd::fill_input_window(sd.input, n, model.memory_length(), ws.input);
  if (model.kind() == ModelKind::hg_r2tdnn) {
    std::copy(sd.c.c.begin(), sd.c.c.end(), ws.input.begin() + static_cast<std::ptrdiff_t>(model.window_dim()));
  }
}

double sample_loss(const DpdModel& model, const Heads& heads, const StateData& sd, const SampleRef& ref,
                   Workspace& ws) {
  load_input(model, sd, ref.index, ws);
  const auto out = dpd::detail::forward_one(model, heads.for_state(ref.state), ws.input, ws.tape);
  const cplx t = sd.target[ref.index];
  const double e0 = out[0] - t.real();
  const double e1 = out[1] - t.imag();
  return e0 * e0 + e1 * e1;
}

// Per-sample loss and gradient. `grad` spans all parameters; for HN the
// output-layer gradient goes to head_grad (2*hd + 2 entries) instead.
double sample_gradient(const DpdModel& model, const Heads& heads, const StateData& sd, const SampleRef& ref,
                       Workspace& ws, std::span<double> grad, std::span<double> head_grad) {
  load_input(model, sd, ref.index, ws);
  const auto& head = heads.for_state(ref.state);
  const auto out = dpd::detail::forward_one(model, head, ws.input, ws.tape);
  const cplx t = sd.target[ref.index];
  const double e0 = out[0] - t.real();
  const double e1 = out[1] - t.imag();
  const double g[2] = {2.0 * e0, 2.0 * e1};

  const auto& h = ws.tape.u.back();
  const std::size_t hd = h.size();
  double* gw = head_grad.data();
  for (std::size_t j = 0; j < 2; ++j) {
    double* row = gw + j * hd;
    for (std::size_t i = 0; i < hd; ++i) row[i] += g[j] * h[i];
    gw[2 * hd + j] += g[j];
  }
  if (model.kind() == ModelKind::svden) {
    double* gs = grad.data() + model.shortcut_offset();
    gs[0] += g[0] * ws.input[0];
    gs[1] += g[0] * ws.input[1];
    gs[2] += g[1] * ws.input[0];
    gs[3] += g[1] * ws.input[1];
  }
  for (std::size_t i = 0; i < hd; ++i) {
    ws.hidden_grad[i] = head.weights[i] * g[0] + head.weights[hd + i] * g[1];
  }
  model.trunk().backward(model.trunk_params(), ws.tape, ws.hidden_grad,
                         grad.subspan(0, model.trunk().param_count()));
  return e0 * e0 + e1 * e1;
}

struct Accumulator {
  std::vector<double> grad;
  std::vector<double> head_grads;  // HN: one 2*hd+2 block per state slot
  std::vector<double> loss;

  Accumulator(const DpdModel& model, std::size_t n_states, bool with_grad)
      : loss(n_states, 0.0) {
    if (!with_grad) return;
    grad.assign(model.param_count(), 0.0);
    if (model.has_hyper()) head_grads.assign(n_states * (2 * model.hidden_dim() + 2), 0.0);
  }

  std::span<double> head_for(const DpdModel& model, std::size_t s) {
    if (!model.has_hyper()) return std::span<double>(grad).subspan(model.head_offset(), model.head_size());
    const std::size_t block = 2 * model.hidden_dim() + 2;
    return std::span<double>(head_grads).subspan(s * block, block);
  }

  void add(const Accumulator& other) {
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += other.grad[i];
    for (std::size_t i = 0; i < head_grads.size(); ++i) head_grads[i] += other.head_grads[i];
    for (std::size_t i = 0; i < loss.size(); ++i) loss[i] += other.loss[i];
  }
};

void run_range(const DpdModel& model, const Heads& heads, std::span<const StateData> states,
               std::span<const SampleRef> batch, Accumulator& acc, bool with_grad) {
  Workspace ws(model);
  for (const auto& ref : batch) {
    const auto& sd = states[ref.state];
    if (with_grad) {
      acc.loss[ref.state] += sample_gradient(model, heads, sd, ref, ws, acc.grad, acc.head_for(model, ref.state));
    } else {
      acc.loss[ref.state] += sample_loss(model, heads, sd, ref, ws);
    }
  }
}

BatchLoss run(const DpdModel& model, std::span<const StateData> states, std::span<const SampleRef> batch,
              std::span<double> grad, Exec exec, bool with_grad) {
  check_batch(model, states, batch);
  if (with_grad && grad.size() != model.param_count()) {
    throw Error(Errc::length_mismatch, "gradient buffer does not match the model");
  }
  Heads heads = prepare_heads(model, states, batch);
  Accumulator total(model, states.size(), with_grad);

  if (exec == Exec::serial || batch.size() <= kChunk) {
    run_range(model, heads, states, batch, total, with_grad);
  } else {
    const std::size_t n_chunks = (batch.size() + kChunk - 1) / kChunk;
    std::vector<Accumulator> partial;
    partial.reserve(n_chunks);
    for (std::size_t c = 0; c < n_chunks; ++c) partial.emplace_back(model, states.size(), with_grad);
    std::exception_ptr failure;
#pragma omp parallel for schedule(static)
    for (long c = 0; c < static_cast<long>(n_chunks); ++c) {
      try {
        const std::size_t begin = static_cast<std::size_t>(c) * kChunk;
        const std::size_t len = std::min(kChunk, batch.size() - begin);
        run_range(model, heads, states, batch.subspan(begin, len), partial[static_cast<std::size_t>(c)], with_grad);
      } catch (...) {
#pragma omp critical(dpdlab_kernel_failure)
        if (!failure) failure = std::current_exception();
      }
    }
    if (failure) std::rethrow_exception(failure);
    for (const auto& p : partial) total.add(p);
  }

  if (with_grad) {
    if (model.has_hyper()) {
      // Back through the hypernetwork once per state present in the batch.
      auto hyper_grad = std::span<double>(total.grad).subspan(model.hyper_offset(), model.hyper().param_count());
      for (std::size_t s = 0; s < states.size(); ++s) {
        if (!heads.used[s]) continue;
        model.hyper().backward(model.hyper_params(), heads.hyper_tapes[s], total.head_for(model, s), hyper_grad);
      }
    }
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += total.grad[i];
  }

  BatchLoss result{0.0, total.loss};
  for (double l : result.per_state) result.total += l;
  return result;
}

}  // namespace

BatchLoss batch_loss(const dpd::DpdModel& model, std::span<const StateData> states,
                     std::span<const SampleRef> batch, Exec exec) {
  return run(model, states, batch, {}, exec, false);
}

BatchLoss accumulate_gradient(const dpd::DpdModel& model, std::span<const StateData> states,
                              std::span<const SampleRef> batch, std::span<double> grad, Exec exec) {
  return run(model, states, batch, grad, exec, true);
}

}  // namespace kernels

namespace dpd {

ComplexSignal predistort_signal(const DpdModel& model, const ComplexSignal& u,
                                const std::optional<StateVector>& c, Exec exec) {
  if (uses_state(model.kind()) && !c) {
    throw Error(Errc::missing_state, std::string(to_string(model.kind())) + " needs the operating-state vector");
  }
  const OutputLayer head = output_layer(model, c);
  ComplexSignal out{std::vector<cplx>(u.size()), u.sample_rate_hz};
  const auto n_total = static_cast<long>(u.size());
  const std::size_t wd = model.window_dim();

  auto body = [&](long begin, long end) {
    nn::Tape tape = model.trunk().make_tape();
    std::vector<double> input(model.input_dim());
    if (model.kind() == ModelKind::hg_r2tdnn) std::copy(c->c.begin(), c->c.end(), input.begin() + static_cast<std::ptrdiff_t>(wd));
    for (long n = begin; n < end; ++n) {
      fill_input_window(u.samples, static_cast<std::size_t>(n), model.memory_length(), input);
      const auto s = detail::forward_one(model, head, input, tape);
      out.samples[static_cast<std::size_t>(n)] = cplx(s[0], s[1]);
    }
  };

  if (exec == Exec::serial) {
    body(0, n_total);
  } else {
#pragma omp parallel
    {
      const long threads = omp_get_num_threads();
      const long tid = omp_get_thread_num();
      const long per = (n_total + threads - 1) / threads;
      const long begin = std::min(n_total, tid * per);
      const long end = std::min(n_total, begin + per);
      body(begin, end);
    }
  }
  return out;
}

}  // namespace dpd
}  // namespace dpdlab
