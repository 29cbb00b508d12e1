#include "dpdlab/models.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "dpdlab/error.hpp"
#include "model_detail.hpp"

namespace dpdlab::dpd {

const char* to_string(ModelKind kind) noexcept {
  switch (kind) {
    case ModelKind::r2tdnn: return "R2TDNN";
    case ModelKind::svden: return "SVDEN";
    case ModelKind::hg_r2tdnn: return "HG-R2TDNN";
    case ModelKind::hn_r2tdnn: return "HN-R2TDNN";
  }
  return "R2TDNN";
}

ModelKind kind_from_string(std::string_view name) {
  for (auto k : {ModelKind::r2tdnn, ModelKind::svden, ModelKind::hg_r2tdnn, ModelKind::hn_r2tdnn}) {
    if (name == to_string(k)) return k;
  }
  throw Error(Errc::invalid_spec, "unknown model kind '" + std::string(name) + "'");
}

bool uses_state(ModelKind kind) noexcept {
  return kind == ModelKind::hg_r2tdnn || kind == ModelKind::hn_r2tdnn;
}

StateVector make_state_vector(double bandwidth_hz, double power_dbm, double bw_max_hz,
                              double p_max_dbm) {
  if (bw_max_hz == 0.0 || p_max_dbm == 0.0) {
    throw Error(Errc::invalid_spec, "state normalization constants must be nonzero");
  }
  const double p = power_dbm / p_max_dbm;
  return StateVector{{bandwidth_hz / bw_max_hz, p, p}};
}

DpdModel::DpdModel(ModelKind kind, int memory_length, std::vector<std::size_t> main_dims,
                   std::vector<std::size_t> hyper_hidden_dims)
    : kind_(kind), memory_length_(memory_length), main_dims_(std::move(main_dims)),
      hyper_hidden_(std::move(hyper_hidden_dims)) {
  if (memory_length_ < 0) throw Error(Errc::dimension_mismatch, "memory length must be >= 0");
  if (main_dims_.size() < 3) {
    throw Error(Errc::dimension_mismatch, "main network needs an input, >= 1 hidden and an output layer");
  }
  if (main_dims_.front() != window_dim()) {
    throw Error(Errc::dimension_mismatch, "D_1 = " + std::to_string(main_dims_.front()) +
                                              " but 2M+2 = " + std::to_string(window_dim()));
  }
  if (main_dims_.back() != 2) throw Error(Errc::dimension_mismatch, "D_R must be 2");
  for (auto d : main_dims_)
    if (d == 0) throw Error(Errc::dimension_mismatch, "layer widths must be positive");

  std::vector<nn::LayerSpec> trunk_layers;
  std::size_t in = window_dim() + (kind_ == ModelKind::hg_r2tdnn ? kStateDim : 0);
  for (std::size_t r = 1; r + 1 < main_dims_.size(); ++r) {
    trunk_layers.push_back({in, main_dims_[r], nn::Activation::tanh});
    in = main_dims_[r];
  }
  trunk_ = nn::Mlp(std::move(trunk_layers));

  if (kind_ == ModelKind::hn_r2tdnn) {
    if (hyper_hidden_.empty()) {
      throw Error(Errc::missing_hyper_spec, "HN-R2TDNN needs hypernetwork hidden dims");
    }
    std::vector<nn::LayerSpec> hyper_layers;
    std::size_t hin = kStateDim;
    for (auto d : hyper_hidden_) {
      if (d == 0) throw Error(Errc::dimension_mismatch, "hypernetwork widths must be positive");
      hyper_layers.push_back({hin, d, nn::Activation::relu});
      hin = d;
    }
    hyper_layers.push_back({hin, 2 * hidden_dim() + 2, nn::Activation::linear});
    hyper_ = nn::Mlp(std::move(hyper_layers));
  } else {
    hyper_hidden_.clear();
  }
  params_.assign(hyper_offset() + hyper_.param_count(), 0.0);
}

DpdModel build_model(ModelKind kind, int memory_length, const std::vector<std::size_t>& main_dims,
                     const std::optional<std::vector<std::size_t>>& hyper_hidden_dims,
                     std::uint64_t seed) {
  if (kind == ModelKind::hn_r2tdnn && (!hyper_hidden_dims || hyper_hidden_dims->empty())) {
    throw Error(Errc::missing_hyper_spec, "HN-R2TDNN needs hypernetwork hidden dims");
  }
  if (kind != ModelKind::hn_r2tdnn && hyper_hidden_dims) {
    throw Error(Errc::missing_hyper_spec, std::string("hypernetwork dims given for ") + to_string(kind));
  }
  DpdModel model(kind, memory_length, main_dims,
                 kind == ModelKind::hn_r2tdnn ? *hyper_hidden_dims : std::vector<std::size_t>{});
  std::mt19937_64 rng(seed);
  auto p = model.params();
  nn::init_glorot(model.trunk(), p.subspan(0, model.trunk().param_count()), rng);
  // head stays zero
  if (kind == ModelKind::svden) {
    auto s = p.subspan(model.shortcut_offset(), 4);
    s[0] = 1.0;
    s[3] = 1.0;
  }
  if (model.has_hyper()) {
    const auto& hyper = model.hyper();
    auto hp = p.subspan(model.hyper_offset(), hyper.param_count());
    nn::init_glorot(hyper, hp, rng);
    const auto& last = hyper.slice(hyper.depth() - 1);
    std::fill(hp.begin() + static_cast<std::ptrdiff_t>(last.weights), hp.end(), 0.0);
  }
  return model;
}

void fill_input_window(std::span<const cplx> u, std::size_t n, int memory_length, std::span<double> out) {
  if (n >= u.size()) {
    throw Error(Errc::index_out_of_range, "window index " + std::to_string(n) + " outside signal of length " +
                                              std::to_string(u.size()));
  }
  const auto depth = static_cast<std::size_t>(memory_length) + 1;
  if (out.size() < 2 * depth) throw Error(Errc::dimension_mismatch, "window buffer too small");
  for (std::size_t m = 0; m < depth; ++m) {
    const cplx v = m <= n ? u[n - m] : cplx{};
    out[2 * m] = v.real();
    out[2 * m + 1] = v.imag();
  }
}

std::vector<double> make_input_window(std::span<const cplx> u, std::size_t n, int memory_length) {
  std::vector<double> w(2 * static_cast<std::size_t>(memory_length) + 2);
  fill_input_window(u, n, memory_length, w);
  return w;
}

OutputLayer hyper_generate(const DpdModel& model, const StateVector& c) {
  if (!model.has_hyper()) {
    throw Error(Errc::wrong_kind, std::string(to_string(model.kind())) + " has no hypernetwork");
  }
  auto tape = model.hyper().make_tape();
  model.hyper().forward(model.hyper_params(), c.c, tape);
  const auto& out = tape.u.back();
  const std::size_t hd = model.hidden_dim();
  OutputLayer layer{hd, std::vector<double>(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(2 * hd)),
                    {out[2 * hd], out[2 * hd + 1]}};
  return layer;
}

OutputLayer output_layer(const DpdModel& model, const std::optional<StateVector>& c) {
  if (model.has_hyper()) {
    if (!c) throw Error(Errc::missing_state, "HN-R2TDNN needs the operating-state vector");
    return hyper_generate(model, *c);
  }
  const std::size_t hd = model.hidden_dim();
  const auto p = model.params().subspan(model.head_offset(), model.head_size());
  OutputLayer layer{hd, std::vector<double>(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(2 * hd)),
                    {p[2 * hd], p[2 * hd + 1]}};
  return layer;
}

std::array<double, 2> predistort_sample(const DpdModel& model, std::span<const double> window,
                                        const std::optional<StateVector>& c) {
  if (uses_state(model.kind()) && !c) {
    throw Error(Errc::missing_state, std::string(to_string(model.kind())) + " needs the operating-state vector");
  }
  if (window.size() != model.window_dim()) {
    throw Error(Errc::dimension_mismatch, "window has " + std::to_string(window.size()) +
                                              " entries, model expects " + std::to_string(model.window_dim()));
  }
  std::vector<double> input(window.begin(), window.end());
  if (model.kind() == ModelKind::hg_r2tdnn) input.insert(input.end(), c->c.begin(), c->c.end());
  const auto head = output_layer(model, c);
  auto tape = model.trunk().make_tape();
  return detail::forward_one(model, head, input, tape);
}

}  // namespace dpdlab::dpd
