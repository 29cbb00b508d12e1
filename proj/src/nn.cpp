#include "dpdlab/nn.hpp"

#include <cmath>
#include <string>

#include "dpdlab/error.hpp"

namespace dpdlab::nn {
namespace {

inline double activate(Activation a, double z) {
  switch (a) {
    case Activation::tanh: return std::tanh(z);
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::linear: return z;
  }
  return z;
}

// Derivative expressed through the post-activation value.
inline double derivative(Activation a, double u) {
  switch (a) {
    case Activation::tanh: return 1.0 - u * u;
    case Activation::relu: return u > 0.0 ? 1.0 : 0.0;
    case Activation::linear: return 1.0;
  }
  return 1.0;
}

}  // namespace

const char* to_string(Activation a) noexcept {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::linear: return "linear";
  }
  return "linear";
}

Activation activation_from_string(std::string_view name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "linear") return Activation::linear;
  throw Error(Errc::invalid_spec, "unknown activation '" + std::string(name) + "'");
}

Mlp::Mlp(std::vector<LayerSpec> layers) : layers_(std::move(layers)) {
  std::size_t offset = 0;
  for (std::size_t r = 0; r < layers_.size(); ++r) {
    const auto& l = layers_[r];
    if (l.in_dim == 0 || l.out_dim == 0) {
      throw Error(Errc::dimension_mismatch, "layer " + std::to_string(r) + " has a zero dimension");
    }
    if (r > 0 && layers_[r - 1].out_dim != l.in_dim) {
      throw Error(Errc::dimension_mismatch, "layer " + std::to_string(r) + " expects " +
                                                std::to_string(l.in_dim) + " inputs, previous emits " +
                                                std::to_string(layers_[r - 1].out_dim));
    }
    LayerSlice s;
    s.weights = offset;
    offset += l.in_dim * l.out_dim;
    s.bias = offset;
    offset += l.out_dim;
    slices_.push_back(s);
  }
  param_count_ = offset;
}

Tape Mlp::make_tape() const {
  Tape t;
  t.u.resize(layers_.size() + 1);
  t.delta.resize(layers_.size());
  if (!layers_.empty()) t.u[0].resize(layers_.front().in_dim);
  for (std::size_t r = 0; r < layers_.size(); ++r) {
    t.u[r + 1].resize(layers_[r].out_dim);
    t.delta[r].resize(layers_[r].out_dim);
  }
  return t;
}

void Mlp::check_params(std::span<const double> params) const {
  if (params.size() != param_count_) {
    throw Error(Errc::dimension_mismatch, "parameter vector has " + std::to_string(params.size()) +
                                              " entries, network needs " + std::to_string(param_count_));
  }
}

void Mlp::forward(std::span<const double> params, std::span<const double> input, Tape& tape) const {
  check_params(params);
  if (input.size() != input_dim()) {
    throw Error(Errc::dimension_mismatch, "input has " + std::to_string(input.size()) +
                                              " entries, network expects " + std::to_string(input_dim()));
  }
  if (tape.u.size() != layers_.size() + 1) tape = make_tape();
  tape.u[0].assign(input.begin(), input.end());
  for (std::size_t r = 0; r < layers_.size(); ++r) {
    const auto& l = layers_[r];
    const double* w = params.data() + slices_[r].weights;
    const double* b = params.data() + slices_[r].bias;
    const double* in = tape.u[r].data();
    auto& out = tape.u[r + 1];
    out.resize(l.out_dim);
    for (std::size_t o = 0; o < l.out_dim; ++o) {
      const double* row = w + o * l.in_dim;
      double z = b[o];
      for (std::size_t i = 0; i < l.in_dim; ++i) z += row[i] * in[i];
      out[o] = activate(l.activation, z);
    }
  }
}

void Mlp::backward(std::span<const double> params, Tape& tape, std::span<const double> output_grad,
                   std::span<double> grad, std::span<double> input_grad) const {
  check_params(params);
  if (grad.size() != param_count_) {
    throw Error(Errc::dimension_mismatch, "gradient buffer size does not match the network");
  }
  if (tape.u.size() != layers_.size() + 1 || tape.u[0].size() != input_dim()) {
    throw Error(Errc::stale_tape, "tape was not produced by this network");
  }
  for (std::size_t r = 0; r < layers_.size(); ++r) {
    if (tape.u[r + 1].size() != layers_[r].out_dim) {
      throw Error(Errc::stale_tape, "tape layer " + std::to_string(r) + " has the wrong width");
    }
  }
  if (output_grad.size() != output_dim()) {
    throw Error(Errc::dimension_mismatch, "output gradient has the wrong length");
  }
  if (!input_grad.empty() && input_grad.size() != input_dim()) {
    throw Error(Errc::dimension_mismatch, "input gradient buffer has the wrong length");
  }
  if (tape.delta.size() != layers_.size()) tape.delta.resize(layers_.size());

  const std::size_t last = layers_.size() - 1;
  {
    auto& d = tape.delta[last];
    d.resize(layers_[last].out_dim);
    for (std::size_t o = 0; o < d.size(); ++o) {
      d[o] = output_grad[o] * derivative(layers_[last].activation, tape.u[last + 1][o]);
    }
  }
  for (std::size_t r = layers_.size(); r-- > 0;) {
    const auto& l = layers_[r];
    const double* w = params.data() + slices_[r].weights;
    double* gw = grad.data() + slices_[r].weights;
    double* gb = grad.data() + slices_[r].bias;
    const double* in = tape.u[r].data();
    const double* d = tape.delta[r].data();
    for (std::size_t o = 0; o < l.out_dim; ++o) {
      const double dv = d[o];
      double* grow = gw + o * l.in_dim;
      for (std::size_t i = 0; i < l.in_dim; ++i) grow[i] += dv * in[i];
      gb[o] += dv;
    }
    if (r == 0 && input_grad.empty()) break;
    // Propagate to the previous layer (or the input).
    double* prev = nullptr;
    if (r > 0) {
      tape.delta[r - 1].assign(l.in_dim, 0.0);
      prev = tape.delta[r - 1].data();
    } else {
      std::fill(input_grad.begin(), input_grad.end(), 0.0);
      prev = input_grad.data();
    }
    for (std::size_t o = 0; o < l.out_dim; ++o) {
      const double dv = d[o];
      if (dv == 0.0) continue;
      const double* row = w + o * l.in_dim;
      for (std::size_t i = 0; i < l.in_dim; ++i) prev[i] += row[i] * dv;
    }
    if (r > 0) {
      const auto act = layers_[r - 1].activation;
      for (std::size_t i = 0; i < l.in_dim; ++i) prev[i] *= derivative(act, in[i]);
    }
  }
}

ForwardResult nn_forward(const Mlp& net, std::span<const double> params,
                         std::span<const double> input) {
  ForwardResult r{{}, net.make_tape()};
  net.forward(params, input, r.tape);
  r.output = r.tape.u.back();
  return r;
}

std::vector<double> nn_backward(const Mlp& net, std::span<const double> params, const Tape& tape,
                                std::span<const double> output_grad) {
  Tape scratch = tape;
  std::vector<double> grad(net.param_count(), 0.0);
  net.backward(params, scratch, output_grad, grad);
  return grad;
}

void init_glorot(const Mlp& net, std::span<double> params, std::mt19937_64& rng) {
  if (params.size() != net.param_count()) {
    throw Error(Errc::dimension_mismatch, "parameter span does not match the network");
  }
  for (std::size_t r = 0; r < net.depth(); ++r) {
    const auto& l = net.layers()[r];
    const double limit = std::sqrt(6.0 / static_cast<double>(l.in_dim + l.out_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    const auto& s = net.slice(r);
    for (std::size_t i = 0; i < l.in_dim * l.out_dim; ++i) params[s.weights + i] = dist(rng);
    for (std::size_t o = 0; o < l.out_dim; ++o) params[s.bias + o] = 0.0;
  }
}

std::vector<double> init_params(const Mlp& net, std::uint64_t seed) {
  std::vector<double> p(net.param_count(), 0.0);
  std::mt19937_64 rng(seed);
  init_glorot(net, p, rng);
  return p;
}

void adam_step(std::span<double> params, std::span<const double> grad, OptimizerState& state) {
  if (grad.size() != params.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw Error(Errc::length_mismatch, "parameter, gradient and moment lengths differ");
  }
  const auto& c = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g * g;
    const double m_hat = m / bc1;
    const double v_hat = v / bc2;
    params[i] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace dpdlab::nn
